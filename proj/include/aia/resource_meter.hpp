#pragma once

#include <cstdint>

namespace aia {

// Attribution bucket for instrumented work. kEncoder covers the input
// encoder passes (the stand-in for a video backbone); everything else is
// kGeneral. Resource reports show both buckets so the scaling of encoder
// work with the memory window length can be read off directly.
enum class Phase { kGeneral = 0, kEncoder = 1 };

// Counts multiply-adds and simultaneously-live tensor floats.
//
// Cost model (forward / backward per parent needing grad):
//   matmul [m,k]x[k,n]        m*k*n        / m*k*n
//   add, mul, relu, scale     size         / size
//   add_row, row_scale        size         / size
//   softmax_rows              2*size       / 2*size
//   layer_norm_rows           4*size       / 6*size
//   bce_with_logits           3*size       / size
//   sum_all, concat, take     0            / 0
//   dense_query (J preds)     J*(n*d + d)  / 2*J*(n*d + d)
//
// Live floats: every Tensor value and grad matrix allocated while the meter
// is enabled counts as live until destroyed. Single-threaded.
class ResourceMeter {
 public:
  static ResourceMeter& instance();

  void enable();
  void disable();
  bool enabled() const { return enabled_; }

  Phase phase() const { return phase_; }
  void set_phase(Phase p) { phase_ = p; }

  void add_macs(Phase p, std::int64_t n);
  void on_alloc(Phase p, std::int64_t floats);
  void on_free(Phase p, std::int64_t floats);

  // One clip-level pass of the input encoder (the backbone stand-in).
  void add_encoder_pass() {
    if (enabled_) ++encoder_passes_;
  }
  std::int64_t encoder_passes() const { return encoder_passes_; }

  std::int64_t macs(Phase p) const { return macs_[idx(p)]; }
  std::int64_t macs_total() const { return macs_[0] + macs_[1]; }
  std::int64_t live(Phase p) const { return live_[idx(p)]; }
  std::int64_t live_total() const { return live_[0] + live_[1]; }
  std::int64_t peak(Phase p) const { return peak_[idx(p)]; }
  std::int64_t peak_total() const { return peak_all_; }

  // Zeroes MAC counters and rebases peaks onto the currently live set.
  void reset_counters();

  // Starts a fresh peak-tracking window (peaks := current live).
  void rebase_peaks();

 private:
  static int idx(Phase p) { return static_cast<int>(p); }

  bool enabled_ = false;
  Phase phase_ = Phase::kGeneral;
  std::int64_t encoder_passes_ = 0;
  std::int64_t macs_[2] = {0, 0};
  std::int64_t live_[2] = {0, 0};
  std::int64_t peak_[2] = {0, 0};
  std::int64_t live_all_ = 0;
  std::int64_t peak_all_ = 0;
};

// Scoped phase switch.
class PhaseScope {
 public:
  explicit PhaseScope(Phase p) : prev_(ResourceMeter::instance().phase()) {
    ResourceMeter::instance().set_phase(p);
  }
  ~PhaseScope() { ResourceMeter::instance().set_phase(prev_); }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  Phase prev_;
};

}  // namespace aia
