#pragma once

#include "aia/memory_pool.hpp"
#include "aia/model.hpp"
#include "aia/world.hpp"

namespace aia {

struct EvalReport {
  std::vector<double> ap;  // one entry per class
  double map = 0.0;
  std::int64_t instances = 0;
};

// Average precision of a ranked list: entries are (score, label), label in
// {0,1}. Sorted by descending score, ties kept in input order;
// AP = sum over positive ranks of precision@rank / positive count.
// This equals the area under the all-points precision-recall curve.
// Zero positives yield AP = 0.
double ranked_average_precision(std::vector<std::pair<double, double>> scored);

// Frame-level multi-label evaluation over a video split. Memory windows are
// served from a pool filled by a pre-sweep over the same split; both sweeps
// use err = 1 and the entries are tagged 1, so the read penalty is exactly
// 1 everywhere (no reweighting at inference). Scores are sigmoids of the
// classifier logits pooled over every valid person of every clip.
EvalReport evaluate_map(const Model& model, const Dataset& data,
                        const std::vector<const VideoSample*>& split, int window,
                        int capacity);

// Per-block attention maps for one clip, after an inference pre-sweep over
// the clip's video (same convention as evaluate_map).
std::vector<AttentionRecord> attention_for_clip(const Model& model,
                                                const Dataset& data,
                                                std::int64_t video_id,
                                                std::int64_t clip_idx, int window,
                                                int capacity);

}  // namespace aia
