#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aia/trainer.hpp"

namespace aia {

struct BenchConfig {
  std::vector<int> l_grid = {1, 4, 5, 15, 30};
  int iterations = 5;
};

// One JSON config fully specifies a run: world, architecture, trainer and
// bench settings plus the master seed. Derived seeds: the world uses `seed`,
// model init `seed+1`, the trainer `seed+2`. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  WorldConfig world;
  IAConfig ia;
  TrainHyper trainer;
  int memory_capacity = 4;
  BenchConfig bench;

  ModelConfig model_config() const;
  void validate() const;
  std::string to_json() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace aia
