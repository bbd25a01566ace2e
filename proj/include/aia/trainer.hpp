#pragma once

#include "aia/memory_pool.hpp"
#include "aia/model.hpp"
#include "aia/world.hpp"

namespace aia {

enum class TrainMode { kAmu, kJoint };

std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

// Joint training forwards and backwards every clip in the 2L+1 window, so
// its cost grows linearly with L; refuse configs beyond this window.
constexpr int kJointWindowGuard = 4;

struct TrainHyper {
  TrainMode mode = TrainMode::kAmu;
  double lr = 0.05;
  double momentum = 0.9;
  std::int64_t iters = 2000;
  int batch = 1;
  int window = 6;  // L

  void validate() const;
};

struct IterationLog {
  std::int64_t iter = 0;  // 1-based
  double loss = 0.0;
  double err_read = 0.0;  // err used for this iteration's reads (inf at iter 1)
};

// Training loop over the train split of a dataset.
//
// AMU mode, per iteration: sample a clip, read the reweighted memory window
// with the current err, encode only the current clip, assemble memory with
// the live features in the center, forward the IA stack and head, backward,
// SGD step, update err to the fresh loss, then write the detached current
// person features back to the pool tagged with err.
//
// Joint mode runs the same pipeline but encodes every in-range clip of the
// window live inside the tape instead of touching a pool.
class Trainer {
 public:
  Trainer(Model& model, MemoryPool& pool, const Dataset& data,
          const TrainHyper& hyper, std::uint64_t seed);

  // Runs `n` more iterations.
  void run(std::int64_t n);

  const std::vector<IterationLog>& log() const { return log_; }
  std::int64_t iterations_done() const { return iter_; }
  double err() const { return err_; }
  Model& model() { return model_; }
  MemoryPool& pool() { return pool_; }

  // Fixed clip schedule (cycled) instead of random sampling; used by the
  // resource bench and tests.
  void set_schedule(std::vector<MemoryKey> schedule);

  // Trainer state (iteration counter, err, RNG, optimizer velocities) for
  // exact resume. Model parameters are saved separately via save_model.
  void save_state(Archive& archive) const;
  void load_state(const Archive& archive);

 private:
  void step();
  MemoryKey sample_clip();
  TensorPtr forward_clip(Tape& tape, const ClipSample& clip, Matrix* targets_out,
                         FeatureSet* persons_out);

  Model& model_;
  MemoryPool& pool_;
  const Dataset& data_;
  TrainHyper hyper_;
  Sgd opt_;
  Rng rng_;
  std::int64_t iter_ = 0;
  double err_ = std::numeric_limits<double>::infinity();
  std::vector<IterationLog> log_;
  std::vector<MemoryKey> schedule_;
};

}  // namespace aia
