#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "aia/feature_set.hpp"

namespace aia {

struct MemoryKey {
  std::int64_t video_id = 0;
  std::int64_t clip_idx = 0;  // 1-based within the video

  auto operator<=>(const MemoryKey&) const = default;
};

// One pool slot: estimated person features for a clip, zero-padded to the
// pool capacity, tagged with the training loss at write time. A loss tag of
// zero marks the zero-init state (nothing written yet).
struct MemoryEntry {
  Matrix features;  // [K, d]
  BoolArray mask;   // [K]
  double loss_tag = 0.0;
  std::int64_t write_step = 0;

  bool is_zero_init() const { return loss_tag == 0.0; }
};

// Detached features handed back by a window read, already penalty-scaled.
struct StoredFeatures {
  Matrix features;  // [K, d]
  BoolArray mask;   // [K]
};

// Staleness penalty of Eq-style loss-ratio reweighting:
//   w = min(err/delta, delta/err), clamped into [0,1] by construction,
// with the limit conventions delta=0 -> 0 and err=inf -> 0.
// err must be positive (or inf); anything else throws.
double penalty(double delta, double err);

// Keyed store of loss-tagged estimated person features. Every key resolves:
// unknown keys (including clips beyond video bounds) read as zero-init.
// Reads and writes are entry-atomic (a reader never sees features from one
// write paired with the tag of another); writers follow last-writer-wins.
class MemoryPool {
 public:
  MemoryPool(int capacity, int d, int window);

  int capacity() const { return capacity_; }
  int dim() const { return d_; }
  int window() const { return window_; }

  // Entry snapshot (copy); zero-init when never written.
  MemoryEntry read(const MemoryKey& key) const;

  // Replaces the entry: features are truncated or zero-padded to capacity
  // rows in insertion order, stored detached from any tape, tagged with err
  // and the write step. err must be finite and positive.
  void write(const MemoryKey& key, const Matrix& features, const BoolArray& mask,
             double err, std::int64_t step);

  // Reweighted window around key: for t' in [t-L, t+L], t' != t, in clip
  // order, returns the entry's features scaled by penalty(tag, err). The
  // pool itself is never mutated by a read.
  std::vector<StoredFeatures> read_window(const MemoryKey& key, double err) const;

  std::size_t entry_count() const;
  std::size_t non_init_count() const;
  std::vector<MemoryKey> keys() const;

  MemoryPool(MemoryPool&&) = default;
  MemoryPool& operator=(MemoryPool&&) = default;

 private:
  MemoryEntry zero_entry() const;

  int capacity_;
  int d_;
  int window_;
  std::map<MemoryKey, MemoryEntry> entries_;
  // Owned via pointer so the pool stays movable; a single pool-wide lock
  // gives the required entry-level atomicity at this scale.
  mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

// Concatenates the 2L reweighted window sets around the live current clip
// features (padded to capacity rows) in clip order, current in the center.
// The result is the key/value input of M-blocks.
FeatureSet assemble_memory(Tape& tape, const std::vector<StoredFeatures>& window,
                           const FeatureSet& current, int capacity);

// Pool checkpoint: one text manifest line (version, K, d, entry count)
// followed by little-endian binary records. Round trips are bit-exact.
void save_pool(const MemoryPool& pool, const std::string& path);
MemoryPool load_pool(const std::string& path);

}  // namespace aia
