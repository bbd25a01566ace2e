#include "aia/world.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace aia {

namespace {

// Attribute draw probabilities, indexed by the enum values.
constexpr double kPersonAttrProbs[kPersonAttrCount] = {0.30, 0.25, 0.15, 0.30};
constexpr double kObjectAttrProbs[kObjectAttrCount] = {0.40, 0.25, 0.35};

int draw_categorical(Rng& rng, const double* probs, int n) {
  double u = uniform_real(rng, 0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return n - 1;
}

Matrix draw_prototypes(Rng& rng, int slots, int attrs, int dim) {
  Matrix protos(slots * attrs, dim);
  for (Eigen::Index r = 0; r < protos.rows(); ++r) {
    double norm2 = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) {
      protos(r, c) = gaussian(rng, 1.0);
      norm2 += protos(r, c) * protos(r, c);
    }
    protos.row(r) /= std::sqrt(norm2);
  }
  return protos;
}

}  // namespace

void WorldConfig::validate() const {
  if (clips_per_video < 1) throw ConfigError("world.clips_per_video must be >= 1");
  if (n_videos < 0) throw ConfigError("world.videos must be >= 0");
  if (eval_videos < 0 || eval_videos > n_videos) {
    throw ConfigError("world.eval_videos must lie in [0, videos]");
  }
  if (persons_per_clip < 1) throw ConfigError("world.persons_per_clip must be >= 1");
  if (objects_per_clip < 0) throw ConfigError("world.objects_per_clip must be >= 0");
  if (attr_dim < 1) throw ConfigError("world.attr_dim must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("world.noise_sigma must be >= 0");
  if (temporal_lag < 1) throw ConfigError("world.temporal_lag must be >= 1");
}

const ClipSample& Dataset::clip(std::int64_t video_id, std::int64_t clip_idx) const {
  for (const auto& v : videos) {
    if (v.id != video_id) continue;
    if (clip_idx < 1 || clip_idx > static_cast<std::int64_t>(v.clips.size())) {
      throw Error("clip index " + std::to_string(clip_idx) + " out of range");
    }
    return v.clips[static_cast<std::size_t>(clip_idx - 1)];
  }
  throw Error("unknown video id " + std::to_string(video_id));
}

std::vector<const VideoSample*> Dataset::train_split() const {
  std::vector<const VideoSample*> out;
  for (int i = 0; i < config.train_videos(); ++i) out.push_back(&videos[i]);
  return out;
}

std::vector<const VideoSample*> Dataset::eval_split() const {
  std::vector<const VideoSample*> out;
  for (int i = config.train_videos(); i < config.n_videos; ++i)
    out.push_back(&videos[i]);
  return out;
}

Dataset generate_dataset(const WorldConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Dataset data;
  data.config = config;
  data.person_protos =
      draw_prototypes(rng, config.persons_per_clip, kPersonAttrCount, config.attr_dim);
  data.object_protos =
      draw_prototypes(rng, config.objects_per_clip, kObjectAttrCount, config.attr_dim);

  const int T = config.clips_per_video;
  const int P = config.persons_per_clip;
  const int O = config.objects_per_clip;
  const int pm = config.phase_mod();

  for (int v = 0; v < config.n_videos; ++v) {
    VideoSample video;
    video.id = v;
    // Latent attribute tables for the whole video first, then features.
    std::vector<std::vector<int>> pattr(T, std::vector<int>(P));
    std::vector<std::vector<int>> oattr(T, std::vector<int>(O));
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < P; ++j)
        pattr[t][j] = draw_categorical(rng, kPersonAttrProbs, kPersonAttrCount);
      for (int o = 0; o < O; ++o)
        oattr[t][o] = draw_categorical(rng, kObjectAttrProbs, kObjectAttrCount);
    }
    for (int t = 1; t <= T; ++t) {
      ClipSample clip;
      clip.video_id = v;
      clip.clip_idx = t;
      clip.person_attrs = pattr[t - 1];
      clip.object_attrs = oattr[t - 1];
      clip.persons = Matrix::Zero(P, config.d_in());
      clip.objects = Matrix::Zero(O, config.d_in());
      clip.person_mask = BoolArray::Constant(P, true);
      clip.object_mask = BoolArray::Constant(O, true);
      for (int j = 0; j < P; ++j) {
        clip.persons.row(j).head(config.attr_dim) =
            data.person_protos.row(j * kPersonAttrCount + pattr[t - 1][j]);
        clip.persons(j, config.attr_dim + t % pm) = 1.0;
        if (config.noise_sigma > 0.0) {
          for (int c = 0; c < config.d_in(); ++c)
            clip.persons(j, c) += gaussian(rng, config.noise_sigma);
        }
      }
      for (int o = 0; o < O; ++o) {
        clip.objects.row(o).head(config.attr_dim) =
            data.object_protos.row(o * kObjectAttrCount + oattr[t - 1][o]);
        clip.objects(o, config.attr_dim + t % pm) = 1.0;
        if (config.noise_sigma > 0.0) {
          for (int c = 0; c < config.d_in(); ++c)
            clip.objects(o, c) += gaussian(rng, config.noise_sigma);
        }
      }
      clip.labels = Matrix::Zero(P, kClassCount);
      for (int j = 0; j < P; ++j) {
        if (pattr[t - 1][j] == kSit) clip.labels(j, 0) = 1.0;
        for (int j2 = 0; j2 < P; ++j2)
          if (j2 != j && pattr[t - 1][j2] == kSpeaker) clip.labels(j, 1) = 1.0;
        for (int o = 0; o < O; ++o)
          if (oattr[t - 1][o] == kCup) clip.labels(j, 2) = 1.0;
        for (int tp = std::max(1, t - config.temporal_lag); tp <= t - 1; ++tp)
          if (pattr[tp - 1][j] == kOpen) clip.labels(j, 3) = 1.0;
      }
      video.clips.push_back(std::move(clip));
    }
    data.videos.push_back(std::move(video));
  }
  return data;
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

void write_matrix(std::ofstream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_raw(out, m(r, c));
}

void read_matrix(std::ifstream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) read_raw(in, m(r, c));
}

constexpr char kDatasetMagic[] = "AIA_DATASET_V1";

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset file for writing: " + path);
  const auto& c = data.config;
  out << kDatasetMagic << " videos=" << c.n_videos << " eval=" << c.eval_videos
      << " clips=" << c.clips_per_video << " persons=" << c.persons_per_clip
      << " objects=" << c.objects_per_clip << " attr_dim=" << c.attr_dim
      << " noise=" << c.noise_sigma << " lag=" << c.temporal_lag
      << " seed=" << c.seed << "\n";
  write_matrix(out, data.person_protos);
  write_matrix(out, data.object_protos);
  for (const auto& video : data.videos) {
    for (const auto& clip : video.clips) {
      write_raw(out, clip.video_id);
      write_raw(out, clip.clip_idx);
      write_matrix(out, clip.persons);
      write_matrix(out, clip.objects);
      for (int a : clip.person_attrs) write_raw(out, static_cast<std::int32_t>(a));
      for (int a : clip.object_attrs) write_raw(out, static_cast<std::int32_t>(a));
      write_matrix(out, clip.labels);
    }
  }
  if (!out) throw IoError("failed writing dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset file truncated: " + path);
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != kDatasetMagic) {
    throw IoError("bad dataset header in " + path + ": '" + line + "'");
  }
  WorldConfig c;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw IoError("bad dataset manifest field: " + field);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "videos") c.n_videos = std::stoi(value);
    else if (key == "eval") c.eval_videos = std::stoi(value);
    else if (key == "clips") c.clips_per_video = std::stoi(value);
    else if (key == "persons") c.persons_per_clip = std::stoi(value);
    else if (key == "objects") c.objects_per_clip = std::stoi(value);
    else if (key == "attr_dim") c.attr_dim = std::stoi(value);
    else if (key == "noise") c.noise_sigma = std::stod(value);
    else if (key == "lag") c.temporal_lag = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else throw IoError("unknown dataset manifest field: " + key);
  }
  c.validate();
  Dataset data;
  data.config = c;
  data.person_protos = Matrix(c.persons_per_clip * kPersonAttrCount, c.attr_dim);
  data.object_protos = Matrix(c.objects_per_clip * kObjectAttrCount, c.attr_dim);
  read_matrix(in, data.person_protos);
  read_matrix(in, data.object_protos);
  for (int v = 0; v < c.n_videos; ++v) {
    VideoSample video;
    video.id = v;
    for (int t = 1; t <= c.clips_per_video; ++t) {
      ClipSample clip;
      clip.persons = Matrix(c.persons_per_clip, c.d_in());
      clip.objects = Matrix(c.objects_per_clip, c.d_in());
      clip.labels = Matrix(c.persons_per_clip, kClassCount);
      clip.person_mask = BoolArray::Constant(c.persons_per_clip, true);
      clip.object_mask = BoolArray::Constant(c.objects_per_clip, true);
      clip.person_attrs.resize(c.persons_per_clip);
      clip.object_attrs.resize(c.objects_per_clip);
      read_raw(in, clip.video_id);
      read_raw(in, clip.clip_idx);
      read_matrix(in, clip.persons);
      read_matrix(in, clip.objects);
      for (auto& a : clip.person_attrs) {
        std::int32_t x = 0;
        read_raw(in, x);
        a = x;
      }
      for (auto& a : clip.object_attrs) {
        std::int32_t x = 0;
        read_raw(in, x);
        a = x;
      }
      read_matrix(in, clip.labels);
      if (!in) throw IoError("dataset file truncated mid-record: " + path);
      if (clip.video_id != v || clip.clip_idx != t) {
        throw IoError("dataset record order mismatch in " + path);
      }
      video.clips.push_back(std::move(clip));
    }
    data.videos.push_back(std::move(video));
  }
  return data;
}

}  // namespace aia
