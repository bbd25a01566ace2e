#include "aia/interaction_block.hpp"

#include <cmath>

namespace aia {

char block_kind_char(BlockKind k) {
  switch (k) {
    case BlockKind::P: return 'P';
    case BlockKind::O: return 'O';
    case BlockKind::M: return 'M';
  }
  throw Error("unknown block kind");
}

BlockKind block_kind_from_char(char c) {
  switch (c) {
    case 'P': return BlockKind::P;
    case 'O': return BlockKind::O;
    case 'M': return BlockKind::M;
  }
  throw ConfigError(std::string("unknown block kind '") + c + "', expected P, O or M");
}

std::vector<TensorPtr> BlockParams::parameters() const {
  std::vector<TensorPtr> ps = {Wq, Wk, Wv, Wo, ln1_gamma, ln1_beta};
  if (ffn_enabled) {
    ps.push_back(ln2_gamma);
    ps.push_back(ln2_beta);
    ps.push_back(ffn_W1);
    ps.push_back(ffn_W2);
  }
  return ps;
}

BlockParams make_block(BlockKind kind, int d, int ffn_hidden, bool ffn_enabled,
                       Rng& rng) {
  if (d < 1) throw ConfigError("block dim must be >= 1");
  if (ffn_enabled && ffn_hidden < 1) throw ConfigError("ffn hidden dim must be >= 1");
  BlockParams b;
  b.kind = kind;
  b.ffn_enabled = ffn_enabled;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  b.Wq = parameter(random_uniform_matrix(rng, d, d, bound));
  b.Wk = parameter(random_uniform_matrix(rng, d, d, bound));
  b.Wv = parameter(random_uniform_matrix(rng, d, d, bound));
  b.Wo = parameter(random_uniform_matrix(rng, d, d, bound));
  b.ln1_gamma = parameter(Matrix::Ones(1, d));
  b.ln1_beta = parameter(Matrix::Zero(1, d));
  if (ffn_enabled) {
    b.ln2_gamma = parameter(Matrix::Ones(1, d));
    b.ln2_beta = parameter(Matrix::Zero(1, d));
    b.ffn_W1 = parameter(random_uniform_matrix(rng, d, ffn_hidden, bound));
    b.ffn_W2 = parameter(random_uniform_matrix(
        rng, ffn_hidden, d, 1.0 / std::sqrt(static_cast<double>(ffn_hidden))));
  }
  return b;
}

namespace {

BoolMatrix broadcast_key_mask(Eigen::Index nq, const BoolArray& key_mask) {
  BoolMatrix m(nq, key_mask.size());
  for (Eigen::Index r = 0; r < nq; ++r)
    for (Eigen::Index c = 0; c < key_mask.size(); ++c) m(r, c) = key_mask(c);
  return m;
}

}  // namespace

FeatureSet block_forward(Tape& tape, const BlockParams& params,
                         const FeatureSet& query, const FeatureSet& kv) {
  const Eigen::Index d = params.dim();
  if (query.dim() != d || kv.dim() != d) {
    throw ShapeError("block_forward: feature dims " + shape_str(query.features->value) +
                     " / " + shape_str(kv.features->value) + " do not match block dim " +
                     std::to_string(d));
  }
  auto q = matmul(tape, query.features, params.Wq);
  auto k = matmul(tape, kv.features, params.Wk);
  auto v = matmul(tape, kv.features, params.Wv);
  // q k^T wired by hand so gradients land on k untransposed.
  auto logits_raw = make_tensor(q->value * k->value.transpose(),
                                q->requires_grad || k->requires_grad);
  {
    const std::int64_t cost = q->rows() * q->cols() * k->rows();
    Phase ph = ResourceMeter::instance().phase();
    ResourceMeter::instance().add_macs(ph, cost);
    if (logits_raw->requires_grad) {
      tape.record([q, k, logits_raw, cost, ph] {
        if (!logits_raw->has_grad()) return;
        ResourceMeter::instance().add_macs(ph, 2 * cost);
        if (q->requires_grad) q->accumulate_grad(logits_raw->grad * k->value);
        if (k->requires_grad) k->accumulate_grad(logits_raw->grad.transpose() * q->value);
      });
    }
  }
  auto logits = scale(tape, logits_raw, 1.0 / std::sqrt(static_cast<double>(d)));
  auto attn = softmax_rows(tape, logits, broadcast_key_mask(query.rows(), kv.mask));
  auto attn_out = matmul(tape, matmul(tape, attn, v), params.Wo);
  auto e1 = layer_norm_rows(tape, add(tape, query.features, attn_out),
                            params.ln1_gamma, params.ln1_beta);
  TensorPtr out = e1;
  if (params.ffn_enabled) {
    auto hidden = relu(tape, matmul(tape, e1, params.ffn_W1));
    auto ffn_out = matmul(tape, hidden, params.ffn_W2);
    out = layer_norm_rows(tape, add(tape, e1, ffn_out), params.ln2_gamma,
                          params.ln2_beta);
  }
  out = row_scale(tape, out, mask_weights(query.mask));
  return FeatureSet{out, query.mask};
}

Matrix attention_map(const BlockParams& params, const FeatureSet& query,
                     const FeatureSet& kv) {
  Tape scratch;
  scratch.set_recording(false);
  const Eigen::Index d = params.dim();
  auto q = matmul(scratch, query.features, params.Wq);
  auto k = matmul(scratch, kv.features, params.Wk);
  Matrix logits = q->value * k->value.transpose() / std::sqrt(static_cast<double>(d));
  auto attn = softmax_rows(scratch, make_tensor(std::move(logits), false),
                           broadcast_key_mask(query.rows(), kv.mask));
  Matrix map = attn->value;
  // Renormalize over valid keys; softmax already guarantees this up to
  // rounding, and all-masked rows stay zero.
  for (Eigen::Index r = 0; r < map.rows(); ++r) {
    if (!query.mask(r)) {
      map.row(r).setZero();
      continue;
    }
    const double s = map.row(r).sum();
    if (s > 0.0) map.row(r) /= s;
  }
  return map;
}

}  // namespace aia
