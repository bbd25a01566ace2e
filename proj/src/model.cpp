#include "aia/model.hpp"

#include <cmath>

namespace aia {

void ModelConfig::validate() const {
  if (d_in < 1) throw ConfigError("model d_in must be >= 1");
  if (n_classes < 1) throw ConfigError("model n_classes must be >= 1");
  ia.validate();
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_parameters() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  out.emplace_back("enc.W", encoder.W);
  out.emplace_back("enc.b", encoder.b);
  for (std::size_t i = 0; i < stack.blocks.size(); ++i) {
    const auto& b = stack.blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    out.emplace_back(p + "Wq", b.Wq);
    out.emplace_back(p + "Wk", b.Wk);
    out.emplace_back(p + "Wv", b.Wv);
    out.emplace_back(p + "Wo", b.Wo);
    out.emplace_back(p + "ln1_gamma", b.ln1_gamma);
    out.emplace_back(p + "ln1_beta", b.ln1_beta);
    if (b.ffn_enabled) {
      out.emplace_back(p + "ln2_gamma", b.ln2_gamma);
      out.emplace_back(p + "ln2_beta", b.ln2_beta);
      out.emplace_back(p + "ffn_W1", b.ffn_W1);
      out.emplace_back(p + "ffn_W2", b.ffn_W2);
    }
  }
  for (std::size_t i = 0; i < stack.dense_logits.size(); ++i)
    for (std::size_t j = 0; j < stack.dense_logits[i].size(); ++j)
      out.emplace_back("dense." + std::to_string(i) + "." + std::to_string(j),
                       stack.dense_logits[i][j]);
  out.emplace_back("head.W", head.W);
  out.emplace_back("head.b", head.b);
  return out;
}

std::vector<TensorPtr> Model::parameters() const {
  std::vector<TensorPtr> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_in));
  m.encoder.W = parameter(random_uniform_matrix(rng, config.d_in, config.d(), bound));
  m.encoder.b = parameter(Matrix::Zero(1, config.d()));
  m.stack = build_stack(config.ia, rng());
  m.head = make_head(config.d(), config.n_classes, rng);
  return m;
}

FeatureSet encode(Tape& tape, const Model& model, const Matrix& raw,
                  const BoolArray& mask) {
  if (raw.cols() != model.config.d_in) {
    throw ShapeError("encode: raw input " + shape_str(raw) + " does not match d_in " +
                     std::to_string(model.config.d_in));
  }
  PhaseScope phase(Phase::kEncoder);
  auto x = constant(raw);
  auto h = add_row(tape, matmul(tape, x, model.encoder.W), model.encoder.b);
  h = row_scale(tape, h, mask_weights(mask));
  return FeatureSet{h, mask};
}

void save_model(const Model& model, Archive& archive) {
  const auto& ia = model.config.ia;
  archive.put_meta("model.d_in", std::to_string(model.config.d_in));
  archive.put_meta("model.n_classes", std::to_string(model.config.n_classes));
  archive.put_meta("ia.structure", ia_structure_name(ia.structure));
  archive.put_meta("ia.order", order_string(ia.order));
  archive.put_meta("ia.repeats", std::to_string(ia.repeats));
  archive.put_meta("ia.d", std::to_string(ia.d));
  archive.put_meta("ia.ffn_hidden", std::to_string(ia.ffn_hidden));
  archive.put_meta("ia.ffn_enabled", ia.ffn_enabled ? "1" : "0");
  for (const auto& [name, p] : model.named_parameters())
    archive.put_array(name, p->value);
}

Model load_model(const Archive& archive) {
  ModelConfig config;
  config.d_in = std::stoi(archive.require_meta("model.d_in"));
  config.n_classes = std::stoi(archive.require_meta("model.n_classes"));
  config.ia.structure = ia_structure_from_name(archive.require_meta("ia.structure"));
  config.ia.order = parse_order(archive.require_meta("ia.order"));
  config.ia.repeats = std::stoi(archive.require_meta("ia.repeats"));
  config.ia.d = std::stoi(archive.require_meta("ia.d"));
  config.ia.ffn_hidden = std::stoi(archive.require_meta("ia.ffn_hidden"));
  config.ia.ffn_enabled = archive.require_meta("ia.ffn_enabled") == "1";
  Model model = build_model(config, 0);
  load_model_into(model, archive);
  return model;
}

void load_model_into(Model& model, const Archive& archive) {
  for (auto& [name, p] : model.named_parameters()) {
    const Matrix& stored = archive.require_array(name);
    if (stored.rows() != p->rows() || stored.cols() != p->cols()) {
      throw IoError("checkpoint array '" + name + "' has shape " + shape_str(stored) +
                    ", expected " + shape_str(p->value));
    }
    p->value = stored;
  }
}

}  // namespace aia
