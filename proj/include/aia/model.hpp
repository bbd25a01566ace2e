#pragma once

#include "aia/checkpoint.hpp"
#include "aia/ia_structure.hpp"

namespace aia {

// Shared linear encoder over raw instance inputs, the stand-in for a video
// backbone. Its work is metered under Phase::kEncoder.
struct Encoder {
  TensorPtr W;  // [d_in, d]
  TensorPtr b;  // [1, d]
  std::vector<TensorPtr> parameters() const { return {W, b}; }
};

struct ModelConfig {
  int d_in = 25;
  int n_classes = 4;
  IAConfig ia;

  int d() const { return ia.d; }
  void validate() const;
};

struct Model {
  ModelConfig config;
  Encoder encoder;
  IAStack stack;
  ClassifierHead head;

  std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
  std::vector<TensorPtr> parameters() const;
};

Model build_model(const ModelConfig& config, std::uint64_t seed);

// Encodes raw instance rows into model features; padded rows stay zero.
FeatureSet encode(Tape& tape, const Model& model, const Matrix& raw,
                  const BoolArray& mask);

void save_model(const Model& model, Archive& archive);
// Rebuilds the model from the archive's embedded config and parameters.
Model load_model(const Archive& archive);
// Loads parameter values into an already-built model of the same config.
void load_model_into(Model& model, const Archive& archive);

}  // namespace aia
