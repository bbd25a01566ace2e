#include "aia/resource_meter.hpp"

#include <algorithm>

namespace aia {

ResourceMeter& ResourceMeter::instance() {
  static ResourceMeter meter;
  return meter;
}

void ResourceMeter::enable() {
  enabled_ = true;
  reset_counters();
}

void ResourceMeter::disable() { enabled_ = false; }

void ResourceMeter::add_macs(Phase p, std::int64_t n) {
  if (enabled_) macs_[idx(p)] += n;
}

void ResourceMeter::on_alloc(Phase p, std::int64_t floats) {
  live_[idx(p)] += floats;
  live_all_ += floats;
  peak_[idx(p)] = std::max(peak_[idx(p)], live_[idx(p)]);
  peak_all_ = std::max(peak_all_, live_all_);
}

// Frees are applied even when disabled so tensors outliving a metered
// window keep the live counters consistent for the next window.
void ResourceMeter::on_free(Phase p, std::int64_t floats) {
  live_[idx(p)] -= floats;
  live_all_ -= floats;
}

void ResourceMeter::reset_counters() {
  macs_[0] = macs_[1] = 0;
  encoder_passes_ = 0;
  rebase_peaks();
}

void ResourceMeter::rebase_peaks() {
  peak_[0] = live_[0];
  peak_[1] = live_[1];
  peak_all_ = live_all_;
}

}  // namespace aia
