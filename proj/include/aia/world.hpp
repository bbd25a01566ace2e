#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aia/types.hpp"

namespace aia {

// Person attribute alphabet. One attribute is drawn per person per clip.
enum PersonAttr : int { kNeutral = 0, kSpeaker = 1, kOpen = 2, kSit = 3 };
constexpr int kPersonAttrCount = 4;

enum ObjectAttr : int { kBox = 0, kCup = 1, kPlate = 2 };
constexpr int kObjectAttrCount = 3;

constexpr int kClassCount = 4;  // pose, person-, object-, temporal-interaction

// Synthetic action-detection world. Each video holds `clips_per_video`
// consecutive clips with a fixed roster of person slots and object slots.
// Instances are attribute prototypes (drawn once per slot/attribute, shared
// across videos) plus Gaussian noise, concatenated with a one-hot encoding
// of the clip index modulo clips_per_video+1 so relative clip order is
// recoverable from features. Labels per target person:
//   0 pose:     the target's own attribute is `sit`
//   1 person:   some OTHER person in the clip is `speaker`
//   2 object:   some object in the clip is `cup`
//   3 temporal: the SAME target was `open` in any of the previous
//               `temporal_lag` clips
struct WorldConfig {
  int clips_per_video = 12;  // T
  int n_videos = 40;
  int eval_videos = 8;  // held-out tail of the video range
  int persons_per_clip = 3;
  int objects_per_clip = 2;
  int attr_dim = 12;
  double noise_sigma = 0.0;
  int temporal_lag = 3;  // L_true
  std::uint64_t seed = 1;

  int phase_mod() const { return clips_per_video + 1; }
  int d_in() const { return attr_dim + phase_mod(); }
  int train_videos() const { return n_videos - eval_videos; }
  void validate() const;
};

struct ClipSample {
  std::int64_t video_id = 0;
  std::int64_t clip_idx = 0;  // 1-based
  Matrix persons;             // [n_p, d_in]
  Matrix objects;             // [n_o, d_in]
  BoolArray person_mask;
  BoolArray object_mask;
  Matrix labels;  // [n_p, kClassCount], entries in {0,1}
  std::vector<int> person_attrs;
  std::vector<int> object_attrs;
};

struct VideoSample {
  std::int64_t id = 0;
  std::vector<ClipSample> clips;  // index t-1 holds clip t
};

struct Dataset {
  WorldConfig config;
  std::vector<VideoSample> videos;
  // Prototypes, one row per (slot, attribute), for nearest-prototype checks.
  Matrix person_protos;  // [persons_per_clip * kPersonAttrCount, attr_dim]
  Matrix object_protos;  // [objects_per_clip * kObjectAttrCount, attr_dim]

  const ClipSample& clip(std::int64_t video_id, std::int64_t clip_idx) const;
  std::vector<const VideoSample*> train_split() const;
  std::vector<const VideoSample*> eval_split() const;
};

// Deterministic under config.seed: equal configs give equal datasets.
Dataset generate_dataset(const WorldConfig& config);

// Record-per-clip binary dump with a text manifest; byte-identical for
// identical configs.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace aia
