#pragma once

#include <vector>

#include "aia/feature_set.hpp"

namespace aia {

// Key/value source of an interaction block: P attends over the (enhanced)
// person set itself, O over object features, M over temporal memory
// features.
enum class BlockKind { P, O, M };

char block_kind_char(BlockKind k);
BlockKind block_kind_from_char(char c);

// Single-head dot-product attention unit with post-norm residuals and an
// optional two-layer ReLU feed-forward. The three kinds share this layout
// and differ only in which feature set is fed as key/value.
struct BlockParams {
  BlockKind kind = BlockKind::P;
  TensorPtr Wq, Wk, Wv, Wo;              // [d, d]
  TensorPtr ln1_gamma, ln1_beta;         // [1, d]
  TensorPtr ln2_gamma, ln2_beta;         // [1, d], only when ffn_enabled
  TensorPtr ffn_W1;                      // [d, h], only when ffn_enabled
  TensorPtr ffn_W2;                      // [h, d], only when ffn_enabled
  bool ffn_enabled = false;

  Eigen::Index dim() const { return Wq->rows(); }
  std::vector<TensorPtr> parameters() const;
};

// Projections init uniform(+-1/sqrt(fan_in)), layer norms gamma=1 beta=0.
BlockParams make_block(BlockKind kind, int d, int ffn_hidden, bool ffn_enabled,
                       Rng& rng);

// Enhances the query set from the key/value set:
//   q = Q*Wq, k = KV*Wk, v = KV*Wv
//   A = softmax_rows(q k^T / sqrt(d))   restricted to valid keys
//   E1 = LN(Q + (A v) Wo)
//   out = LN(E1 + relu(E1 W1) W2)       when the feed-forward is enabled
// Padded query rows are re-zeroed; the output mask equals the query mask.
// When every key is masked the attention contributes nothing and the block
// reduces to the residual/norm path.
FeatureSet block_forward(Tape& tape, const BlockParams& params,
                         const FeatureSet& query, const FeatureSet& kv);

// The block's softmax attention restricted to valid keys, rows renormalized
// so valid entries sum to 1. Padded-key columns and padded-query rows are
// zero. Forward-only (nothing is recorded).
Matrix attention_map(const BlockParams& params, const FeatureSet& query,
                     const FeatureSet& kv);

}  // namespace aia
