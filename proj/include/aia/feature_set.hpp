#pragma once

#include "aia/autograd.hpp"
#include "aia/types.hpp"

namespace aia {

// A set of per-instance feature rows plus a validity mask. Rows with
// mask=false are zero padding and must hold all-zero features; they are
// excluded from attention and re-zeroed by every block.
struct FeatureSet {
  TensorPtr features;  // [n, d]
  BoolArray mask;      // [n]

  Eigen::Index rows() const { return features->rows(); }
  Eigen::Index dim() const { return features->cols(); }
  int valid_count() const {
    int n = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      if (mask(i)) ++n;
    return n;
  }
};

inline FeatureSet make_feature_set(Matrix features, BoolArray mask,
                                   bool requires_grad = false) {
  if (features.rows() != mask.size()) {
    throw ShapeError("feature set: mask length " + std::to_string(mask.size()) +
                     " does not match rows of " + shape_str(features));
  }
  return FeatureSet{make_tensor(std::move(features), requires_grad), std::move(mask)};
}

inline FeatureSet make_feature_set(Matrix features) {
  BoolArray mask = BoolArray::Constant(features.rows(), true);
  return make_feature_set(std::move(features), std::move(mask));
}

inline Vector mask_weights(const BoolArray& mask) {
  Vector w(mask.size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) w(i) = mask(i) ? 1.0 : 0.0;
  return w;
}

inline std::vector<int> valid_indices(const BoolArray& mask) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask(i)) idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace aia
