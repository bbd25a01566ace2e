#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "aia/resource_meter.hpp"
#include "aia/types.hpp"

namespace aia {

// Dense 2-D tensor with an optional gradient. All tensors in this project
// are rank <= 2; vectors are stored as 1xn rows and scalars as 1x1.
// Gradients accumulate across uses and across backward calls; they are
// cleared only by an optimizer step.
struct Tensor {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  Phase phase = Phase::kGeneral;

  Tensor(Matrix v, bool rg);
  ~Tensor();
  Tensor(const Tensor&) = delete;
  Tensor& operator=(const Tensor&) = delete;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  bool has_grad() const { return grad.size() > 0; }

  // Throws on a requires_grad tensor whose gradient was never populated.
  const Matrix& checked_grad() const;
  // Zero matrix when no gradient has been accumulated.
  Matrix grad_or_zero() const;

  void accumulate_grad(const Matrix& g);
  void zero_grad();

 private:
  std::int64_t metered_value_ = 0;
  std::int64_t metered_grad_ = 0;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Matrix value, bool requires_grad = false);
// Constant leaf: never receives gradient.
TensorPtr constant(Matrix value);
// Trainable leaf.
TensorPtr parameter(Matrix value);

// Define-by-run gradient tape. Operations append their backward closure in
// execution order, which is a valid topological order of the graph; the
// tape is rebuilt from scratch every training iteration.
class Tape {
 public:
  void record(std::function<void()> backward_step);
  std::size_t size() const { return steps_.size(); }

  // Whether ops should record (off for inference-only forwards).
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // Seeds d(loss)/d(loss) = 1 and replays recorded steps in reverse,
  // populating grads of every reachable requires_grad tensor.
  // The loss must be a 1x1 tensor.
  void backward(const TensorPtr& loss);

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
};

// --- differentiable ops -----------------------------------------------

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
// x [m,n] plus a [1,n] row broadcast over rows.
TensorPtr add_row(Tape& tape, const TensorPtr& x, const TensorPtr& row);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr relu(Tape& tape, const TensorPtr& x);
TensorPtr scale(Tape& tape, const TensorPtr& x, double s);
// Scales row i of x by the constant weights[i].
TensorPtr row_scale(Tape& tape, const TensorPtr& x, const Vector& weights);
TensorPtr sum_all(Tape& tape, const TensorPtr& x);
TensorPtr concat_rows(Tape& tape, const std::vector<TensorPtr>& parts);
TensorPtr take_rows(Tape& tape, const TensorPtr& x, const std::vector<int>& rows);

// Row-wise masked softmax. Masked entries are exactly zero in the output
// and receive no gradient; the valid entries of each row sum to 1. A row
// with no valid entry yields all zeros (no attention contribution).
TensorPtr softmax_rows(Tape& tape, const TensorPtr& x, const BoolMatrix& mask);

// Normalizes each row to zero mean and unit (population) variance with eps
// inside the square root, then applies the gamma/beta affine (both [1,n]).
TensorPtr layer_norm_rows(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                          const TensorPtr& beta, double eps = 1e-5);

// Mean over all entries of numerically stable sigmoid cross-entropy.
// Targets must be exactly 0 or 1. Returns a 1x1 tensor.
TensorPtr bce_with_logits(Tape& tape, const TensorPtr& logits, const Matrix& targets);

// --- optimizer ---------------------------------------------------------

// SGD with momentum: v <- momentum*v + grad; p <- p - lr*v. Clears grads.
class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(const std::vector<TensorPtr>& params);

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

  // Velocity state, exposed for checkpointing. Indexed like the params
  // vector passed to step(); empty until the first step.
  std::vector<Matrix>& velocities() { return velocities_; }
  const std::vector<Matrix>& velocities() const { return velocities_; }

 private:
  double lr_;
  double momentum_;
  std::vector<Matrix> velocities_;
};

}  // namespace aia
