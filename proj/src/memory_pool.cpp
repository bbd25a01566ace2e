#include "aia/memory_pool.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace aia {

double penalty(double delta, double err) {
  if (std::isnan(err) || err <= 0.0) {
    throw Error("penalty: err must be positive or inf, got " + std::to_string(err));
  }
  if (delta < 0.0) throw Error("penalty: delta must be >= 0");
  if (delta == 0.0) return 0.0;           // zero-init entry carries no signal
  if (std::isinf(err)) return 0.0;        // first iteration: err = inf
  if (std::isinf(delta)) return 0.0;
  return std::min(err / delta, delta / err);
}

MemoryPool::MemoryPool(int capacity, int d, int window)
    : capacity_(capacity), d_(d), window_(window) {
  if (capacity < 1) throw ConfigError("memory capacity must be >= 1");
  if (d < 1) throw ConfigError("memory feature dim must be >= 1");
  if (window < 0) throw ConfigError("memory window must be >= 0");
}

MemoryEntry MemoryPool::zero_entry() const {
  MemoryEntry e;
  e.features = Matrix::Zero(capacity_, d_);
  e.mask = BoolArray::Constant(capacity_, false);
  e.loss_tag = 0.0;
  e.write_step = 0;
  return e;
}

MemoryEntry MemoryPool::read(const MemoryKey& key) const {
  std::lock_guard<std::mutex> lock(*mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return zero_entry();
  return it->second;
}

void MemoryPool::write(const MemoryKey& key, const Matrix& features,
                       const BoolArray& mask, double err, std::int64_t step) {
  if (!(std::isfinite(err) && err > 0.0)) {
    throw Error("pool write: err must be finite and positive, got " +
                std::to_string(err));
  }
  if (features.cols() != d_) {
    throw ShapeError("pool write: features " + shape_str(features) +
                     " do not match pool dim " + std::to_string(d_));
  }
  if (mask.size() != features.rows()) {
    throw ShapeError("pool write: mask length " + std::to_string(mask.size()) +
                     " does not match feature rows " + std::to_string(features.rows()));
  }
  MemoryEntry e = zero_entry();
  const Eigen::Index keep = std::min<Eigen::Index>(features.rows(), capacity_);
  e.features.topRows(keep) = features.topRows(keep);
  e.mask.head(keep) = mask.head(keep);
  e.loss_tag = err;
  e.write_step = step;
  std::lock_guard<std::mutex> lock(*mu_);
  entries_[key] = std::move(e);
}

std::vector<StoredFeatures> MemoryPool::read_window(const MemoryKey& key,
                                                    double err) const {
  std::vector<StoredFeatures> out;
  out.reserve(2 * window_);
  for (std::int64_t t = key.clip_idx - window_; t <= key.clip_idx + window_; ++t) {
    if (t == key.clip_idx) continue;
    MemoryEntry e = read(MemoryKey{key.video_id, t});
    const double w = penalty(e.loss_tag, err);
    out.push_back(StoredFeatures{w * e.features, std::move(e.mask)});
  }
  return out;
}

std::size_t MemoryPool::entry_count() const {
  std::lock_guard<std::mutex> lock(*mu_);
  return entries_.size();
}

std::size_t MemoryPool::non_init_count() const {
  std::lock_guard<std::mutex> lock(*mu_);
  std::size_t n = 0;
  for (const auto& [k, e] : entries_)
    if (!e.is_zero_init()) ++n;
  return n;
}

std::vector<MemoryKey> MemoryPool::keys() const {
  std::lock_guard<std::mutex> lock(*mu_);
  std::vector<MemoryKey> ks;
  ks.reserve(entries_.size());
  for (const auto& [k, e] : entries_) ks.push_back(k);
  return ks;
}

FeatureSet assemble_memory(Tape& tape, const std::vector<StoredFeatures>& window,
                           const FeatureSet& current, int capacity) {
  const int L2 = static_cast<int>(window.size());
  if (L2 % 2 != 0) {
    throw ShapeError("assemble_memory: window holds " + std::to_string(L2) +
                     " sets, expected an even count (2L)");
  }
  const int L = L2 / 2;
  const Eigen::Index d = current.dim();
  if (current.rows() > capacity) {
    throw ShapeError("assemble_memory: current clip has " +
                     std::to_string(current.rows()) + " rows, capacity is " +
                     std::to_string(capacity));
  }

  std::vector<TensorPtr> parts;
  BoolArray mask = BoolArray::Constant((2 * L + 1) * capacity, false);
  Eigen::Index row = 0;
  auto push_stored = [&](const StoredFeatures& s) {
    if (s.features.rows() != capacity || s.features.cols() != d) {
      throw ShapeError("assemble_memory: stored features " + shape_str(s.features) +
                       " do not match " + shape_str(capacity, d));
    }
    parts.push_back(constant(s.features));
    for (Eigen::Index i = 0; i < capacity; ++i) mask(row + i) = s.mask(i);
    row += capacity;
  };

  for (int i = 0; i < L; ++i) push_stored(window[i]);
  // Live current features in the center slot, zero-padded to capacity.
  parts.push_back(current.features);
  for (Eigen::Index i = 0; i < current.rows(); ++i) mask(row + i) = current.mask(i);
  if (current.rows() < capacity) {
    parts.push_back(constant(Matrix::Zero(capacity - current.rows(), d)));
  }
  row += capacity;
  for (int i = L; i < 2 * L; ++i) push_stored(window[i]);

  return FeatureSet{concat_rows(tape, parts), std::move(mask)};
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

constexpr char kPoolMagic[] = "AIA_POOL_V1";

}  // namespace

void save_pool(const MemoryPool& pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open pool file for writing: " + path);
  const auto keys = pool.keys();
  out << kPoolMagic << " " << pool.capacity() << " " << pool.dim() << " "
      << pool.window() << " " << keys.size() << "\n";
  for (const auto& key : keys) {
    const MemoryEntry e = pool.read(key);
    write_raw(out, key.video_id);
    write_raw(out, key.clip_idx);
    write_raw(out, e.loss_tag);
    write_raw(out, e.write_step);
    for (Eigen::Index i = 0; i < e.mask.size(); ++i) {
      const std::uint8_t b = e.mask(i) ? 1 : 0;
      write_raw(out, b);
    }
    // Row-major doubles, K*d of them.
    for (Eigen::Index r = 0; r < e.features.rows(); ++r)
      for (Eigen::Index c = 0; c < e.features.cols(); ++c)
        write_raw(out, e.features(r, c));
  }
  if (!out) throw IoError("failed writing pool file: " + path);
}

MemoryPool load_pool(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pool file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("pool file truncated: " + path);
  std::istringstream header(line);
  std::string magic;
  int capacity = 0, d = 0, window = 0;
  std::size_t count = 0;
  header >> magic >> capacity >> d >> window >> count;
  if (!header || magic != kPoolMagic) {
    throw IoError("bad pool file header in " + path + ": '" + line + "'");
  }
  if (capacity < 1 || d < 1 || window < 0) {
    throw IoError("bad pool geometry in " + path);
  }
  MemoryPool pool(capacity, d, window);
  for (std::size_t i = 0; i < count; ++i) {
    MemoryKey key;
    double tag = 0.0;
    std::int64_t step = 0;
    read_raw(in, key.video_id);
    read_raw(in, key.clip_idx);
    read_raw(in, tag);
    read_raw(in, step);
    Matrix features(capacity, d);
    BoolArray mask(capacity);
    for (int r = 0; r < capacity; ++r) {
      std::uint8_t b = 0;
      read_raw(in, b);
      mask(r) = b != 0;
    }
    for (int r = 0; r < capacity; ++r)
      for (int c = 0; c < d; ++c) read_raw(in, features(r, c));
    if (!in) throw IoError("pool file truncated mid-record: " + path);
    if (tag == 0.0) continue;  // zero-init entries need no storage
    pool.write(key, features, mask, tag, step);
  }
  return pool;
}

}  // namespace aia
