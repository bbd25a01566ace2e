#pragma once

// Central finite-difference gradient checking. The forward functor must be
// a pure function of the leaf values, rebuilding its graph on the given
// tape each call. Central differences are only meaningful away from relu
// kinks; callers with relu in the path should reject instances whose
// pre-activations sit within a few step sizes of zero (see kKinkMargin).

#include <cmath>
#include <functional>

#include "aia/autograd.hpp"

namespace gradcheck {

constexpr double kStep = 1e-3;
constexpr double kTolerance = 1e-4;
constexpr double kKinkMargin = 1e-2;

using Forward = std::function<aia::TensorPtr(aia::Tape&)>;

struct Report {
  double max_rel_err = 0.0;
  bool ok = true;
};

inline double rel_err(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

// Compares backward grads of every leaf against central differences.
inline Report check(const std::vector<aia::TensorPtr>& leaves, const Forward& forward,
                    double h = kStep, double tol = kTolerance) {
  for (const auto& leaf : leaves) leaf->grad = aia::Matrix();

  aia::Tape tape;
  auto loss = forward(tape);
  tape.backward(loss);
  std::vector<aia::Matrix> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) analytic.push_back(leaf->grad_or_zero());

  auto eval = [&]() {
    aia::Tape t;
    t.set_recording(false);
    return forward(t)->value(0, 0);
  };

  Report report;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto& value = leaves[i]->value;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double saved = value(r, c);
        value(r, c) = saved + h;
        const double up = eval();
        value(r, c) = saved - h;
        const double down = eval();
        value(r, c) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double err = rel_err(analytic[i](r, c), numeric);
        report.max_rel_err = std::max(report.max_rel_err, err);
        if (err >= tol) report.ok = false;
      }
    }
  }
  for (const auto& leaf : leaves) leaf->grad = aia::Matrix();
  return report;
}

}  // namespace gradcheck
