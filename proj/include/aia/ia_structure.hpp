#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aia/interaction_block.hpp"

namespace aia {

enum class IaStructure { kParallel, kSerial, kDenseSerial };

std::string ia_structure_name(IaStructure s);
IaStructure ia_structure_from_name(const std::string& name);

// Block composition recipe. `order` is one pass over distinct block kinds
// (e.g. P,O,M) repeated `repeats` times, so the stack holds
// repeats*order.size() blocks. An empty order yields a pass-through stack
// (the no-interaction baseline).
struct IAConfig {
  IaStructure structure = IaStructure::kSerial;
  std::vector<BlockKind> order = {BlockKind::P, BlockKind::O, BlockKind::M};
  int repeats = 2;
  int d = 32;
  int ffn_hidden = 0;  // 0 means 2*d
  bool ffn_enabled = true;

  int block_count() const { return repeats * static_cast<int>(order.size()); }
  int hidden() const { return ffn_hidden > 0 ? ffn_hidden : 2 * d; }
  void validate() const;
};

std::vector<BlockKind> parse_order(const std::string& order);
std::string order_string(const std::vector<BlockKind>& order);

// Ordered interaction blocks plus, for the dense-serial structure, the
// per-block aggregation logits: dense_logits[i][j] is the d-vector logit of
// predecessor j of block i, where j=0 is the raw input stage and j=k is the
// output of block k-1. Zero-initialized logits make the initial aggregation
// an exact uniform average.
struct IAStack {
  IaStructure structure = IaStructure::kSerial;
  std::vector<BlockParams> blocks;
  std::vector<std::vector<TensorPtr>> dense_logits;

  std::vector<TensorPtr> parameters() const;
};

IAStack build_stack(const IAConfig& config, std::uint64_t seed);

// Per-dimension softmax mixture of predecessor outputs: for every feature
// dimension the logits are normalized across predecessors and the output is
// the weighted elementwise sum of the predecessors.
TensorPtr dense_query(Tape& tape, const std::vector<TensorPtr>& prev_outputs,
                      const std::vector<TensorPtr>& logits);

// One attention map snapshot per executed block.
struct AttentionRecord {
  int block_index = 0;
  BlockKind kind = BlockKind::P;
  Matrix map;  // [nq, nk] rows normalized over valid keys
  std::vector<int> valid_queries;
  std::vector<int> valid_keys;
};

// Runs the stack over person/object/memory features and returns the
// enhanced features of the valid target persons ([n_targets, d]).
// Serial: the person set is enhanced block by block, each block picking its
// key/value source by kind. Dense serial: same, except each block's query
// is the dense_query mixture of the input stage and all previous outputs.
// Parallel: one branch per kind in `order`, each `repeats` blocks deep and
// fed the raw person set; branch outputs are merged by elementwise mean.
TensorPtr ia_forward(Tape& tape, const IAStack& stack, const FeatureSet& persons,
                     const FeatureSet& objects, const FeatureSet& memory,
                     std::vector<AttentionRecord>* attention_out = nullptr);

// Final multi-label classifier: logits = A * W + b.
struct ClassifierHead {
  TensorPtr W;  // [d, n_classes]
  TensorPtr b;  // [1, n_classes]
  std::vector<TensorPtr> parameters() const { return {W, b}; }
};

ClassifierHead make_head(int d, int n_classes, Rng& rng);
TensorPtr classify(Tape& tape, const ClassifierHead& head, const TensorPtr& features);

}  // namespace aia
