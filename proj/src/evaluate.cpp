#include "aia/evaluate.hpp"

#include <algorithm>
#include <cmath>

namespace aia {

double ranked_average_precision(std::vector<std::pair<double, double>> scored) {
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::int64_t positives = 0;
  for (const auto& [s, y] : scored)
    if (y > 0.5) ++positives;
  if (positives == 0) return 0.0;
  double ap = 0.0;
  std::int64_t hits = 0;
  for (std::size_t rank = 0; rank < scored.size(); ++rank) {
    if (scored[rank].second > 0.5) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

namespace {

constexpr double kInferenceErr = 1.0;  // tag = err = 1 makes every penalty 1

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Fills a fresh pool with the split's encoded person features.
MemoryPool fill_inference_pool(const Model& model,
                               const std::vector<const VideoSample*>& split,
                               int window, int capacity) {
  MemoryPool pool(capacity, model.config.d(), window);
  std::int64_t step = 0;
  for (const VideoSample* video : split) {
    for (const auto& clip : video->clips) {
      Tape tape;
      tape.set_recording(false);
      FeatureSet persons = encode(tape, model, clip.persons, clip.person_mask);
      pool.write(MemoryKey{clip.video_id, clip.clip_idx}, persons.features->value,
                 persons.mask, kInferenceErr, ++step);
    }
  }
  return pool;
}

}  // namespace

EvalReport evaluate_map(const Model& model, const Dataset& data,
                        const std::vector<const VideoSample*>& split, int window,
                        int capacity) {
  if (split.empty()) throw Error("evaluate_map: empty split");
  MemoryPool pool = fill_inference_pool(model, split, window, capacity);

  const int classes = model.config.n_classes;
  std::vector<std::vector<std::pair<double, double>>> per_class(classes);
  std::int64_t instances = 0;
  for (const VideoSample* video : split) {
    for (const auto& clip : video->clips) {
      Tape tape;
      tape.set_recording(false);
      FeatureSet persons = encode(tape, model, clip.persons, clip.person_mask);
      FeatureSet objects = encode(tape, model, clip.objects, clip.object_mask);
      auto stored = pool.read_window(MemoryKey{clip.video_id, clip.clip_idx},
                                     kInferenceErr);
      FeatureSet memory = assemble_memory(tape, stored, persons, capacity);
      TensorPtr action = ia_forward(tape, model.stack, persons, objects, memory);
      TensorPtr logits = classify(tape, model.head, action);
      const auto valid = valid_indices(clip.person_mask);
      for (std::size_t i = 0; i < valid.size(); ++i) {
        ++instances;
        for (int c = 0; c < classes; ++c) {
          per_class[c].emplace_back(sigmoid(logits->value(static_cast<Eigen::Index>(i), c)),
                                    clip.labels(valid[i], c));
        }
      }
    }
  }

  EvalReport report;
  report.instances = instances;
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    report.ap.push_back(ranked_average_precision(per_class[c]));
    sum += report.ap.back();
  }
  report.map = classes > 0 ? sum / classes : 0.0;
  return report;
}

std::vector<AttentionRecord> attention_for_clip(const Model& model,
                                                const Dataset& data,
                                                std::int64_t video_id,
                                                std::int64_t clip_idx, int window,
                                                int capacity) {
  const VideoSample* video = nullptr;
  for (const auto& v : data.videos)
    if (v.id == video_id) video = &v;
  if (!video) throw Error("unknown video id " + std::to_string(video_id));
  MemoryPool pool = fill_inference_pool(model, {video}, window, capacity);

  const ClipSample& clip = data.clip(video_id, clip_idx);
  Tape tape;
  tape.set_recording(false);
  FeatureSet persons = encode(tape, model, clip.persons, clip.person_mask);
  FeatureSet objects = encode(tape, model, clip.objects, clip.object_mask);
  auto stored = pool.read_window(MemoryKey{video_id, clip_idx}, kInferenceErr);
  FeatureSet memory = assemble_memory(tape, stored, persons, capacity);
  std::vector<AttentionRecord> records;
  ia_forward(tape, model.stack, persons, objects, memory, &records);
  return records;
}

}  // namespace aia
