#include "aia/ia_structure.hpp"

#include <algorithm>
#include <cmath>

namespace aia {

std::string ia_structure_name(IaStructure s) {
  switch (s) {
    case IaStructure::kParallel: return "parallel";
    case IaStructure::kSerial: return "serial";
    case IaStructure::kDenseSerial: return "dense_serial";
  }
  throw Error("unknown IA structure");
}

IaStructure ia_structure_from_name(const std::string& name) {
  if (name == "parallel") return IaStructure::kParallel;
  if (name == "serial") return IaStructure::kSerial;
  if (name == "dense_serial") return IaStructure::kDenseSerial;
  throw ConfigError("unknown IA structure '" + name +
                    "', expected parallel|serial|dense_serial");
}

std::vector<BlockKind> parse_order(const std::string& order) {
  std::vector<BlockKind> out;
  for (char c : order) {
    if (c == ',' || c == ' ' || c == '-' || c == '>') continue;
    out.push_back(block_kind_from_char(c));
  }
  return out;
}

std::string order_string(const std::vector<BlockKind>& order) {
  std::string s;
  for (BlockKind k : order) s.push_back(block_kind_char(k));
  return s;
}

void IAConfig::validate() const {
  if (repeats < 1) throw ConfigError("ia.repeats must be >= 1");
  if (d < 1) throw ConfigError("ia feature dim must be >= 1");
  bool seen[3] = {false, false, false};
  for (BlockKind k : order) {
    auto& flag = seen[static_cast<int>(k)];
    if (flag) {
      throw ConfigError("invalid order '" + order_string(order) +
                        "': each block kind may appear at most once");
    }
    flag = true;
  }
}

std::vector<TensorPtr> IAStack::parameters() const {
  std::vector<TensorPtr> ps;
  for (const auto& b : blocks) {
    auto bp = b.parameters();
    ps.insert(ps.end(), bp.begin(), bp.end());
  }
  for (const auto& logits : dense_logits)
    ps.insert(ps.end(), logits.begin(), logits.end());
  return ps;
}

IAStack build_stack(const IAConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  IAStack stack;
  stack.structure = config.structure;
  for (int r = 0; r < config.repeats; ++r)
    for (BlockKind k : config.order)
      stack.blocks.push_back(
          make_block(k, config.d, config.hidden(), config.ffn_enabled, rng));
  if (config.structure == IaStructure::kDenseSerial) {
    for (std::size_t i = 0; i < stack.blocks.size(); ++i) {
      std::vector<TensorPtr> logits;
      for (std::size_t j = 0; j <= i; ++j)
        logits.push_back(parameter(Matrix::Zero(1, config.d)));
      stack.dense_logits.push_back(std::move(logits));
    }
  }
  return stack;
}

TensorPtr dense_query(Tape& tape, const std::vector<TensorPtr>& prev_outputs,
                      const std::vector<TensorPtr>& logits) {
  if (prev_outputs.empty()) throw ShapeError("dense_query: needs >= 1 predecessor");
  if (prev_outputs.size() != logits.size()) {
    throw ShapeError("dense_query: " + std::to_string(prev_outputs.size()) +
                     " predecessors but " + std::to_string(logits.size()) + " logits");
  }
  const Eigen::Index n = prev_outputs.front()->rows();
  const Eigen::Index d = prev_outputs.front()->cols();
  const std::size_t J = prev_outputs.size();
  bool rg = false;
  for (std::size_t j = 0; j < J; ++j) {
    if (prev_outputs[j]->rows() != n || prev_outputs[j]->cols() != d) {
      throw ShapeError("dense_query: predecessor " + std::to_string(j) + " shape " +
                       shape_str(prev_outputs[j]->value) + " differs from " +
                       shape_str(n, d));
    }
    if (logits[j]->rows() != 1 || logits[j]->cols() != d) {
      throw ShapeError("dense_query: logit " + std::to_string(j) + " must be [1," +
                       std::to_string(d) + "], got " + shape_str(logits[j]->value));
    }
    rg = rg || prev_outputs[j]->requires_grad || logits[j]->requires_grad;
  }

  // Per-dimension softmax across predecessors.
  Matrix weights(static_cast<Eigen::Index>(J), d);
  for (Eigen::Index c = 0; c < d; ++c) {
    double mx = logits[0]->value(0, c);
    for (std::size_t j = 1; j < J; ++j) mx = std::max(mx, logits[j]->value(0, c));
    double sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double e = std::exp(logits[j]->value(0, c) - mx);
      weights(static_cast<Eigen::Index>(j), c) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < J; ++j) weights(static_cast<Eigen::Index>(j), c) /= sum;
  }
  Matrix v = Matrix::Zero(n, d);
  for (std::size_t j = 0; j < J; ++j) {
    v += (prev_outputs[j]->value.array().rowwise() *
          weights.row(static_cast<Eigen::Index>(j)).array())
             .matrix();
  }
  const std::int64_t cost = static_cast<std::int64_t>(J) * (n * d + d);
  Phase ph = ResourceMeter::instance().phase();
  ResourceMeter::instance().add_macs(ph, cost);

  auto out = make_tensor(std::move(v), rg);
  if (rg) {
    tape.record([prev_outputs, logits, out, weights, cost, ph] {
      if (!out->has_grad()) return;
      ResourceMeter::instance().add_macs(ph, 2 * cost);
      const std::size_t J = prev_outputs.size();
      const Eigen::Index d = out->cols();
      // g(j,c) = sum_r dY(r,c) * E_j(r,c); softmax Jacobian per dimension.
      Matrix g(static_cast<Eigen::Index>(J), d);
      for (std::size_t j = 0; j < J; ++j) {
        g.row(static_cast<Eigen::Index>(j)) =
            out->grad.cwiseProduct(prev_outputs[j]->value).colwise().sum();
        if (prev_outputs[j]->requires_grad) {
          prev_outputs[j]->accumulate_grad(
              (out->grad.array().rowwise() *
               weights.row(static_cast<Eigen::Index>(j)).array())
                  .matrix());
        }
      }
      Eigen::RowVectorXd wg = (weights.array() * g.array()).colwise().sum().matrix();
      for (std::size_t j = 0; j < J; ++j) {
        if (!logits[j]->requires_grad) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        logits[j]->accumulate_grad(
            (weights.row(jj).array() * (g.row(jj).array() - wg.array())).matrix());
      }
    });
  }
  return out;
}

namespace {

const FeatureSet& kv_for(BlockKind kind, const FeatureSet& current,
                         const FeatureSet& objects, const FeatureSet& memory) {
  switch (kind) {
    case BlockKind::P: return current;
    case BlockKind::O: return objects;
    case BlockKind::M: return memory;
  }
  throw Error("unknown block kind");
}

void maybe_record_attention(std::vector<AttentionRecord>* sink, int index,
                            const BlockParams& params, const FeatureSet& query,
                            const FeatureSet& kv) {
  if (!sink) return;
  sink->push_back(AttentionRecord{index, params.kind, attention_map(params, query, kv),
                                  valid_indices(query.mask), valid_indices(kv.mask)});
}

}  // namespace

TensorPtr ia_forward(Tape& tape, const IAStack& stack, const FeatureSet& persons,
                     const FeatureSet& objects, const FeatureSet& memory,
                     std::vector<AttentionRecord>* attention_out) {
  const Eigen::Index d = persons.dim();
  if ((objects.rows() > 0 && objects.dim() != d) ||
      (memory.rows() > 0 && memory.dim() != d)) {
    throw ShapeError("ia_forward: feature dims differ");
  }
  TensorPtr merged;
  int exec_index = 0;
  if (stack.blocks.empty()) {
    merged = persons.features;
  } else if (stack.structure == IaStructure::kSerial) {
    FeatureSet cur = persons;
    for (const auto& block : stack.blocks) {
      const FeatureSet& kv = kv_for(block.kind, cur, objects, memory);
      maybe_record_attention(attention_out, exec_index++, block, cur, kv);
      cur = block_forward(tape, block, cur, kv);
    }
    merged = cur.features;
  } else if (stack.structure == IaStructure::kDenseSerial) {
    std::vector<TensorPtr> prevs = {persons.features};
    for (std::size_t i = 0; i < stack.blocks.size(); ++i) {
      const auto& block = stack.blocks[i];
      FeatureSet query{dense_query(tape, prevs, stack.dense_logits[i]), persons.mask};
      const FeatureSet& kv = kv_for(block.kind, query, objects, memory);
      maybe_record_attention(attention_out, exec_index++, block, query, kv);
      FeatureSet enhanced = block_forward(tape, block, query, kv);
      prevs.push_back(enhanced.features);
    }
    merged = prevs.back();
  } else {  // parallel: independent branches over the raw person set
    std::vector<BlockKind> kinds;
    for (const auto& block : stack.blocks) {
      if (std::find(kinds.begin(), kinds.end(), block.kind) == kinds.end())
        kinds.push_back(block.kind);
    }
    std::vector<TensorPtr> branch_outputs;
    for (BlockKind kind : kinds) {
      FeatureSet cur = persons;
      for (const auto& block : stack.blocks) {
        if (block.kind != kind) continue;
        const FeatureSet& kv = kv_for(block.kind, cur, objects, memory);
        maybe_record_attention(attention_out, exec_index++, block, cur, kv);
        cur = block_forward(tape, block, cur, kv);
      }
      branch_outputs.push_back(cur.features);
    }
    TensorPtr acc = branch_outputs.front();
    for (std::size_t i = 1; i < branch_outputs.size(); ++i)
      acc = add(tape, acc, branch_outputs[i]);
    merged = scale(tape, acc, 1.0 / static_cast<double>(branch_outputs.size()));
  }
  return take_rows(tape, merged, valid_indices(persons.mask));
}

ClassifierHead make_head(int d, int n_classes, Rng& rng) {
  ClassifierHead head;
  head.W = parameter(
      random_uniform_matrix(rng, d, n_classes, 1.0 / std::sqrt(static_cast<double>(d))));
  head.b = parameter(Matrix::Zero(1, n_classes));
  return head;
}

TensorPtr classify(Tape& tape, const ClassifierHead& head, const TensorPtr& features) {
  return add_row(tape, matmul(tape, features, head.W), head.b);
}

}  // namespace aia
