#pragma once

// Independent reference implementations used to freeze expected test
// values. Everything here computes with plain scalar loops over nested
// std::vector buffers so it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <vector>

#include "aia/types.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid from_eigen(const aia::Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

inline aia::Matrix to_eigen(const Grid& g) {
  aia::Matrix m(g.size(), g.empty() ? 0 : g[0].size());
  for (std::size_t r = 0; r < g.size(); ++r)
    for (std::size_t c = 0; c < g[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = g[r][c];
  return m;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  const std::size_t m = a.size(), k = b.size(), n = k ? b[0].size() : 0;
  Grid out(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) out[i][j] += a[i][t] * b[t][j];
  return out;
}

inline std::vector<double> softmax_masked(const std::vector<double>& logits,
                                          const std::vector<bool>& valid) {
  std::vector<double> out(logits.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (valid[i]) mx = std::max(mx, logits[i]);
  if (!std::isfinite(mx)) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid[i]) continue;
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (valid[i]) out[i] /= sum;
  return out;
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x,
                                          const std::vector<double>& gamma,
                                          const std::vector<double>& beta,
                                          double eps) {
  const std::size_t n = x.size();
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (x[i] - mu) / std::sqrt(var + eps) * gamma[i] + beta[i];
  return out;
}

// Interaction block reference: dot-product attention over valid keys with
// 1/sqrt(d) scaling, residual + layer norm, optional relu feed-forward with
// a second norm, padded query rows re-zeroed. Returns the enhanced rows;
// optionally exposes the attention matrix and the ffn pre-activations.
struct BlockOracleParams {
  Grid Wq, Wk, Wv, Wo;
  std::vector<double> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  Grid ffn_W1, ffn_W2;
  bool ffn_enabled = false;
  double eps = 1e-5;
};

inline Grid block_forward(const BlockOracleParams& p, const Grid& query,
                          const std::vector<bool>& query_mask, const Grid& kv,
                          const std::vector<bool>& kv_mask,
                          Grid* attention_out = nullptr,
                          std::vector<double>* ffn_preacts_out = nullptr) {
  const std::size_t nq = query.size();
  const std::size_t nk = kv.size();
  const std::size_t d = p.Wq.size();
  const Grid q = matmul(query, p.Wq);
  const Grid k = matmul(kv, p.Wk);
  const Grid v = matmul(kv, p.Wv);
  Grid attn(nq, std::vector<double>(nk, 0.0));
  for (std::size_t r = 0; r < nq; ++r) {
    std::vector<double> logits(nk, 0.0);
    for (std::size_t c = 0; c < nk; ++c) {
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += q[r][t] * k[c][t];
      logits[c] = dot / std::sqrt(static_cast<double>(d));
    }
    attn[r] = softmax_masked(logits, kv_mask);
  }
  if (attention_out) *attention_out = attn;
  const Grid attn_v = matmul(attn, v);
  const Grid attn_out = matmul(attn_v, p.Wo);
  Grid e1(nq);
  for (std::size_t r = 0; r < nq; ++r) {
    std::vector<double> sum(d);
    for (std::size_t c = 0; c < d; ++c) sum[c] = query[r][c] + attn_out[r][c];
    e1[r] = layer_norm_row(sum, p.ln1_gamma, p.ln1_beta, p.eps);
  }
  Grid out = e1;
  if (p.ffn_enabled) {
    const std::size_t h = p.ffn_W1[0].size();
    for (std::size_t r = 0; r < nq; ++r) {
      std::vector<double> hidden(h, 0.0);
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t c = 0; c < d; ++c) hidden[j] += e1[r][c] * p.ffn_W1[c][j];
        if (ffn_preacts_out) ffn_preacts_out->push_back(hidden[j]);
        hidden[j] = std::max(hidden[j], 0.0);
      }
      std::vector<double> ffn(d, 0.0);
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t j = 0; j < h; ++j) ffn[c] += hidden[j] * p.ffn_W2[j][c];
      std::vector<double> sum(d);
      for (std::size_t c = 0; c < d; ++c) sum[c] = e1[r][c] + ffn[c];
      out[r] = layer_norm_row(sum, p.ln2_gamma, p.ln2_beta, p.eps);
    }
  }
  for (std::size_t r = 0; r < nq; ++r)
    if (!query_mask[r]) std::fill(out[r].begin(), out[r].end(), 0.0);
  return out;
}

// Brute-force average precision: for every threshold in the score set,
// count TP/FP/FN over the whole list, build the precision-recall points in
// decreasing-threshold order and integrate the all-points curve.
inline double average_precision(const std::vector<std::pair<double, double>>& scored) {
  std::size_t positives = 0;
  for (const auto& [s, y] : scored)
    if (y > 0.5) ++positives;
  if (positives == 0) return 0.0;
  // Rank-induced thresholds: walk the sorted order, but recount from the
  // full list at every step (O(n^2)) so this stays independent of any
  // single-sweep implementation.
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].first > scored[b].first;
  });
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t cut = 1; cut <= order.size(); ++cut) {
    std::size_t tp = 0;
    for (std::size_t i = 0; i < cut; ++i)
      if (scored[order[i]].second > 0.5) ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(cut);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

}  // namespace oracle
