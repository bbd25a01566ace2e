#pragma once

#include "aia/trainer.hpp"

namespace aia {

// Instrumented resource usage of one training configuration. MAC counts
// cover forward and backward work of a full iteration; live floats count
// tensor values and grads alive on the tape at once. The encoder columns
// isolate the backbone stand-in, whose replication across the window is
// what the joint-training baseline pays for.
struct ResourceReport {
  TrainMode mode = TrainMode::kAmu;
  int window = 0;  // L
  std::int64_t encoder_passes = 0;     // clip encodings per iteration
  std::int64_t macs_total = 0;         // median per iteration
  std::int64_t macs_encoder = 0;       // median per iteration
  std::int64_t peak_live_total = 0;    // max over the measured iterations
  std::int64_t peak_live_encoder = 0;
};

// Runs `iterations` instrumented training iterations of the given mode on a
// fixed world with a deterministic interior-clip schedule (so window
// clamping never perturbs the counts) and reports medians/peaks.
ResourceReport count_resources(TrainMode mode, int window, const WorldConfig& world,
                               const IAConfig& ia, int iterations = 5);

}  // namespace aia
