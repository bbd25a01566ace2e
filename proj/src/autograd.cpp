#include "aia/autograd.hpp"

#include <cmath>
#include <utility>

namespace aia {

namespace {

ResourceMeter& meter() { return ResourceMeter::instance(); }

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->value) +
                     " vs " + shape_str(b->value));
  }
}

}  // namespace

Tensor::Tensor(Matrix v, bool rg) : value(std::move(v)), requires_grad(rg) {
  auto& m = meter();
  phase = m.phase();
  if (m.enabled()) {
    metered_value_ = value.size();
    m.on_alloc(phase, metered_value_);
  }
}

Tensor::~Tensor() {
  auto& m = meter();
  if (metered_value_) m.on_free(phase, metered_value_);
  if (metered_grad_) m.on_free(phase, metered_grad_);
}

const Matrix& Tensor::checked_grad() const {
  if (!has_grad()) throw Error("missing gradient: tensor has no accumulated grad");
  return grad;
}

Matrix Tensor::grad_or_zero() const {
  if (has_grad()) return grad;
  return Matrix::Zero(rows(), cols());
}

void Tensor::accumulate_grad(const Matrix& g) {
  if (g.rows() != rows() || g.cols() != cols()) {
    throw ShapeError("grad shape " + shape_str(g) + " does not match value " +
                     shape_str(value));
  }
  if (!has_grad()) {
    grad = g;
    auto& m = meter();
    if (m.enabled()) {
      metered_grad_ = grad.size();
      m.on_alloc(phase, metered_grad_);
    }
  } else {
    grad += g;
  }
}

void Tensor::zero_grad() {
  if (has_grad()) grad.setZero();
}

TensorPtr make_tensor(Matrix value, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(value), requires_grad);
}

TensorPtr constant(Matrix value) { return make_tensor(std::move(value), false); }

TensorPtr parameter(Matrix value) { return make_tensor(std::move(value), true); }

void Tape::record(std::function<void()> backward_step) {
  if (recording_) steps_.push_back(std::move(backward_step));
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->rows() != 1 || loss->cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 scalar, got " +
                     shape_str(loss->value));
  }
  loss->accumulate_grad(Matrix::Ones(1, 1));
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// Each op validates shapes, computes the forward value, and (when a parent
// requires grad) records a closure that pulls the output grad and pushes it
// to the parents. Closures no-op when no gradient reached the output.

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a->value) +
                     " vs " + shape_str(b->value));
  }
  const std::int64_t cost = a->rows() * a->cols() * b->cols();
  Phase ph = meter().phase();
  meter().add_macs(ph, cost);
  auto out = make_tensor(a->value * b->value, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    tape.record([a, b, out, cost, ph] {
      if (!out->has_grad()) return;
      if (a->requires_grad) {
        meter().add_macs(ph, cost);
        a->accumulate_grad(out->grad * b->value.transpose());
      }
      if (b->requires_grad) {
        meter().add_macs(ph, cost);
        b->accumulate_grad(a->value.transpose() * out->grad);
      }
    });
  }
  return out;
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  Phase ph = meter().phase();
  meter().add_macs(ph, a->value.size());
  auto out = make_tensor(a->value + b->value, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    tape.record([a, b, out, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      if (a->requires_grad) a->accumulate_grad(out->grad);
      if (b->requires_grad) b->accumulate_grad(out->grad);
    });
  }
  return out;
}

TensorPtr add_row(Tape& tape, const TensorPtr& x, const TensorPtr& row) {
  if (row->rows() != 1 || row->cols() != x->cols()) {
    throw ShapeError("add_row: expected [1," + std::to_string(x->cols()) +
                     "] row, got " + shape_str(row->value) + " for x " +
                     shape_str(x->value));
  }
  Phase ph = meter().phase();
  meter().add_macs(ph, x->value.size());
  Matrix v = x->value;
  v.rowwise() += row->value.row(0);
  auto out = make_tensor(std::move(v), x->requires_grad || row->requires_grad);
  if (out->requires_grad) {
    tape.record([x, row, out, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      if (x->requires_grad) x->accumulate_grad(out->grad);
      if (row->requires_grad) row->accumulate_grad(out->grad.colwise().sum());
    });
  }
  return out;
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  Phase ph = meter().phase();
  meter().add_macs(ph, a->value.size());
  auto out = make_tensor(a->value.cwiseProduct(b->value),
                         a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    tape.record([a, b, out, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      if (a->requires_grad) a->accumulate_grad(out->grad.cwiseProduct(b->value));
      if (b->requires_grad) b->accumulate_grad(out->grad.cwiseProduct(a->value));
    });
  }
  return out;
}

TensorPtr relu(Tape& tape, const TensorPtr& x) {
  Phase ph = meter().phase();
  meter().add_macs(ph, x->value.size());
  auto out = make_tensor(x->value.cwiseMax(0.0), x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      Matrix gate = (x->value.array() > 0.0).cast<double>();
      x->accumulate_grad(out->grad.cwiseProduct(gate));
    });
  }
  return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double s) {
  Phase ph = meter().phase();
  meter().add_macs(ph, x->value.size());
  auto out = make_tensor(x->value * s, x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out, s, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      x->accumulate_grad(out->grad * s);
    });
  }
  return out;
}

TensorPtr row_scale(Tape& tape, const TensorPtr& x, const Vector& weights) {
  if (weights.size() != x->rows()) {
    throw ShapeError("row_scale: weight count " + std::to_string(weights.size()) +
                     " does not match rows of " + shape_str(x->value));
  }
  Phase ph = meter().phase();
  meter().add_macs(ph, x->value.size());
  auto out = make_tensor(weights.asDiagonal() * x->value, x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out, weights, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, out->grad.size());
      x->accumulate_grad(weights.asDiagonal() * out->grad);
    });
  }
  return out;
}

TensorPtr sum_all(Tape& tape, const TensorPtr& x) {
  auto out = make_tensor(Matrix::Constant(1, 1, x->value.sum()), x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out] {
      if (!out->has_grad()) return;
      x->accumulate_grad(Matrix::Constant(x->rows(), x->cols(), out->grad(0, 0)));
    });
  }
  return out;
}

TensorPtr concat_rows(Tape& tape, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const Eigen::Index cols = parts.front()->cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(p->value) +
                       " vs expected cols " + std::to_string(cols));
    }
    rows += p->rows();
    rg = rg || p->requires_grad;
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p->rows()) = p->value;
    off += p->rows();
  }
  auto out = make_tensor(std::move(v), rg);
  if (rg) {
    tape.record([parts, out] {
      if (!out->has_grad()) return;
      Eigen::Index off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          p->accumulate_grad(out->grad.middleRows(off, p->rows()));
        }
        off += p->rows();
      }
    });
  }
  return out;
}

TensorPtr take_rows(Tape& tape, const TensorPtr& x, const std::vector<int>& rows) {
  Matrix v(static_cast<Eigen::Index>(rows.size()), x->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x->rows()) {
      throw ShapeError("take_rows: index " + std::to_string(rows[i]) +
                       " out of range for " + shape_str(x->value));
    }
    v.row(static_cast<Eigen::Index>(i)) = x->value.row(rows[i]);
  }
  auto out = make_tensor(std::move(v), x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out, rows] {
      if (!out->has_grad()) return;
      Matrix g = Matrix::Zero(x->rows(), x->cols());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        g.row(rows[i]) += out->grad.row(static_cast<Eigen::Index>(i));
      }
      x->accumulate_grad(g);
    });
  }
  return out;
}

TensorPtr softmax_rows(Tape& tape, const TensorPtr& x, const BoolMatrix& mask) {
  if (mask.rows() != x->rows() || mask.cols() != x->cols()) {
    throw ShapeError("softmax_rows: mask " + shape_str(mask.rows(), mask.cols()) +
                     " does not match " + shape_str(x->value));
  }
  Phase ph = meter().phase();
  meter().add_macs(ph, 2 * x->value.size());
  Matrix v = Matrix::Zero(x->rows(), x->cols());
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x->cols(); ++c)
      if (mask(r, c)) mx = std::max(mx, x->value(r, c));
    if (!std::isfinite(mx)) continue;  // no valid entry: all-zero row
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x->cols(); ++c) {
      if (!mask(r, c)) continue;
      const double e = std::exp(x->value(r, c) - mx);
      v(r, c) = e;
      sum += e;
    }
    for (Eigen::Index c = 0; c < x->cols(); ++c)
      if (mask(r, c)) v(r, c) /= sum;
  }
  auto out = make_tensor(std::move(v), x->requires_grad);
  if (out->requires_grad) {
    tape.record([x, out, mask, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, 2 * out->grad.size());
      Matrix g = Matrix::Zero(x->rows(), x->cols());
      for (Eigen::Index r = 0; r < x->rows(); ++r) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < x->cols(); ++c)
          if (mask(r, c)) dot += out->grad(r, c) * out->value(r, c);
        for (Eigen::Index c = 0; c < x->cols(); ++c)
          if (mask(r, c)) g(r, c) = out->value(r, c) * (out->grad(r, c) - dot);
      }
      x->accumulate_grad(g);
    });
  }
  return out;
}

TensorPtr layer_norm_rows(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                          const TensorPtr& beta, double eps) {
  const Eigen::Index n = x->cols();
  if (n < 1) throw ShapeError("layer_norm_rows: needs at least one column");
  if (gamma->rows() != 1 || gamma->cols() != n || beta->rows() != 1 || beta->cols() != n) {
    throw ShapeError("layer_norm_rows: gamma/beta must be [1," + std::to_string(n) +
                     "], got " + shape_str(gamma->value) + " and " + shape_str(beta->value));
  }
  Phase ph = meter().phase();
  meter().add_macs(ph, 4 * x->value.size());
  Matrix xhat(x->rows(), n);
  Vector inv_std(x->rows());
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    const double mu = x->value.row(r).mean();
    const double var = (x->value.row(r).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(r) = inv;
    xhat.row(r) = (x->value.row(r).array() - mu) * inv;
  }
  Matrix v = (xhat.array().rowwise() * gamma->value.row(0).array()).rowwise() +
             beta->value.row(0).array();
  const bool rg = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  auto out = make_tensor(std::move(v), rg);
  if (rg) {
    tape.record([x, gamma, beta, out, xhat, inv_std, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, 6 * out->grad.size());
      if (beta->requires_grad) beta->accumulate_grad(out->grad.colwise().sum());
      if (gamma->requires_grad) {
        gamma->accumulate_grad(out->grad.cwiseProduct(xhat).colwise().sum());
      }
      if (x->requires_grad) {
        const Eigen::Index n = x->cols();
        Matrix dxhat = out->grad.array().rowwise() * gamma->value.row(0).array();
        Matrix g(x->rows(), n);
        for (Eigen::Index r = 0; r < x->rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
          g.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
        x->accumulate_grad(g);
      }
    });
  }
  return out;
}

TensorPtr bce_with_logits(Tape& tape, const TensorPtr& logits, const Matrix& targets) {
  if (targets.rows() != logits->rows() || targets.cols() != logits->cols()) {
    throw ShapeError("bce_with_logits: targets " + shape_str(targets) +
                     " do not match logits " + shape_str(logits->value));
  }
  for (Eigen::Index r = 0; r < targets.rows(); ++r)
    for (Eigen::Index c = 0; c < targets.cols(); ++c)
      if (targets(r, c) != 0.0 && targets(r, c) != 1.0) {
        throw Error("bce_with_logits: target at (" + std::to_string(r) + "," +
                    std::to_string(c) + ") is not binary: " +
                    std::to_string(targets(r, c)));
      }
  const double count = static_cast<double>(targets.size());
  if (count == 0) throw ShapeError("bce_with_logits: empty input");
  Phase ph = meter().phase();
  meter().add_macs(ph, 3 * logits->value.size());
  double total = 0.0;
  for (Eigen::Index r = 0; r < targets.rows(); ++r) {
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
      const double z = logits->value(r, c);
      const double y = targets(r, c);
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
  }
  auto out = make_tensor(Matrix::Constant(1, 1, total / count), logits->requires_grad);
  if (out->requires_grad) {
    tape.record([logits, out, targets, count, ph] {
      if (!out->has_grad()) return;
      meter().add_macs(ph, logits->value.size());
      Matrix g(logits->rows(), logits->cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          const double z = logits->value(r, c);
          const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                      : std::exp(z) / (1.0 + std::exp(z));
          g(r, c) = (sig - targets(r, c)) / count * out->grad(0, 0);
        }
      }
      logits->accumulate_grad(g);
    });
  }
  return out;
}

void Sgd::step(const std::vector<TensorPtr>& params) {
  if (velocities_.empty()) {
    velocities_.reserve(params.size());
    for (const auto& p : params)
      velocities_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  if (velocities_.size() != params.size()) {
    throw Error("sgd: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const Matrix& g = p.checked_grad();  // missing-grad error when unpopulated
    velocities_[i] = momentum_ * velocities_[i] + g;
    p.value -= lr_ * velocities_[i];
    p.zero_grad();
  }
}

}  // namespace aia
