#include "aia/trainer.hpp"

#include <sstream>

namespace aia {

std::string train_mode_name(TrainMode m) {
  return m == TrainMode::kAmu ? "amu" : "joint";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "amu") return TrainMode::kAmu;
  if (name == "joint") return TrainMode::kJoint;
  throw ConfigError("unknown train mode '" + name + "', expected amu|joint");
}

void TrainHyper::validate() const {
  if (lr <= 0.0) throw ConfigError("trainer.lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("trainer.momentum must lie in [0, 1)");
  }
  if (iters < 0) throw ConfigError("trainer.iters must be >= 0");
  if (batch < 1) throw ConfigError("trainer.batch must be >= 1");
  if (window < 0) throw ConfigError("trainer.window must be >= 0");
  if (mode == TrainMode::kJoint && window > kJointWindowGuard) {
    throw ConfigError("resource guard: joint training is limited to window <= " +
                      std::to_string(kJointWindowGuard) + ", got " +
                      std::to_string(window));
  }
}

Trainer::Trainer(Model& model, MemoryPool& pool, const Dataset& data,
                 const TrainHyper& hyper, std::uint64_t seed)
    : model_(model),
      pool_(pool),
      data_(data),
      hyper_(hyper),
      opt_(hyper.lr, hyper.momentum),
      rng_(seed) {
  hyper_.validate();
  if (data_.config.train_videos() < 1) {
    throw ConfigError("trainer needs at least one training video");
  }
  if (pool_.dim() != model_.config.d()) {
    throw ConfigError("pool dim " + std::to_string(pool_.dim()) +
                      " does not match model dim " + std::to_string(model_.config.d()));
  }
}

void Trainer::set_schedule(std::vector<MemoryKey> schedule) {
  schedule_ = std::move(schedule);
}

MemoryKey Trainer::sample_clip() {
  if (!schedule_.empty()) {
    return schedule_[static_cast<std::size_t>(iter_) % schedule_.size()];
  }
  const std::int64_t v = uniform_int(rng_, 0, data_.config.train_videos() - 1);
  const std::int64_t t = uniform_int(rng_, 1, data_.config.clips_per_video);
  return MemoryKey{v, t};
}

// Shared forward path from a clip sample to multi-label logits. Fills the
// memory key/value set according to the training mode.
TensorPtr Trainer::forward_clip(Tape& tape, const ClipSample& clip,
                                Matrix* targets_out, FeatureSet* persons_out) {
  FeatureSet persons = encode(tape, model_, clip.persons, clip.person_mask);
  ResourceMeter::instance().add_encoder_pass();
  FeatureSet objects = encode(tape, model_, clip.objects, clip.object_mask);

  const int L = hyper_.window;
  const int K = pool_.capacity();
  const int d = model_.config.d();
  FeatureSet memory;
  if (hyper_.mode == TrainMode::kAmu) {
    auto window = pool_.read_window(MemoryKey{clip.video_id, clip.clip_idx}, err_);
    memory = assemble_memory(tape, window, persons, K);
  } else {
    // Joint: every in-range neighbor clip is encoded live on this tape.
    std::vector<TensorPtr> parts;
    BoolArray mask = BoolArray::Constant((2 * L + 1) * K, false);
    Eigen::Index row = 0;
    if (persons.rows() > K) {
      throw ShapeError("joint window: current clip has " +
                       std::to_string(persons.rows()) + " persons, capacity is " +
                       std::to_string(K));
    }
    for (std::int64_t t = clip.clip_idx - L; t <= clip.clip_idx + L; ++t) {
      if (t == clip.clip_idx) {
        parts.push_back(persons.features);
        for (Eigen::Index i = 0; i < persons.rows(); ++i)
          mask(row + i) = persons.mask(i);
        if (persons.rows() < K)
          parts.push_back(constant(Matrix::Zero(K - persons.rows(), d)));
      } else if (t >= 1 && t <= data_.config.clips_per_video) {
        const ClipSample& nb = data_.clip(clip.video_id, t);
        FeatureSet enc = encode(tape, model_, nb.persons, nb.person_mask);
        ResourceMeter::instance().add_encoder_pass();
        const Eigen::Index keep = std::min<Eigen::Index>(enc.rows(), K);
        TensorPtr live = keep == enc.rows()
                             ? enc.features
                             : take_rows(tape, enc.features,
                                         [&] {
                                           std::vector<int> idx(keep);
                                           for (Eigen::Index i = 0; i < keep; ++i)
                                             idx[i] = static_cast<int>(i);
                                           return idx;
                                         }());
        parts.push_back(live);
        for (Eigen::Index i = 0; i < keep; ++i)
          if (enc.mask(i)) mask(row + i) = true;
        if (keep < K) parts.push_back(constant(Matrix::Zero(K - keep, d)));
      } else {
        parts.push_back(constant(Matrix::Zero(K, d)));  // beyond video bounds
      }
      row += K;
    }
    memory = FeatureSet{concat_rows(tape, parts), std::move(mask)};
  }

  TensorPtr action = ia_forward(tape, model_.stack, persons, objects, memory);
  TensorPtr logits = classify(tape, model_.head, action);
  const auto valid = valid_indices(clip.person_mask);
  Matrix targets(static_cast<Eigen::Index>(valid.size()), clip.labels.cols());
  for (std::size_t i = 0; i < valid.size(); ++i)
    targets.row(static_cast<Eigen::Index>(i)) = clip.labels.row(valid[i]);
  *targets_out = std::move(targets);
  *persons_out = persons;
  return logits;
}

void Trainer::step() {
  Tape tape;
  const double err_read = err_;
  struct PendingWrite {
    MemoryKey key;
    Matrix features;
    BoolArray mask;
  };
  std::vector<PendingWrite> writes;
  TensorPtr loss;
  for (int b = 0; b < hyper_.batch; ++b) {
    const MemoryKey key = sample_clip();
    const ClipSample& clip = data_.clip(key.video_id, key.clip_idx);
    Matrix targets;
    FeatureSet persons;
    TensorPtr logits = forward_clip(tape, clip, &targets, &persons);
    TensorPtr sample_loss = bce_with_logits(tape, logits, targets);
    loss = loss ? add(tape, loss, sample_loss) : sample_loss;
    if (hyper_.mode == TrainMode::kAmu) {
      // Detached copy of the raw encoded person features (Alg. write source).
      writes.push_back(PendingWrite{key, persons.features->value, persons.mask});
    }
  }
  if (hyper_.batch > 1) loss = scale(tape, loss, 1.0 / hyper_.batch);

  tape.backward(loss);
  opt_.step(model_.parameters());
  err_ = loss->value(0, 0);  // err updated after backward
  ++iter_;
  for (const auto& w : writes)
    pool_.write(w.key, w.features, w.mask, err_, iter_);
  log_.push_back(IterationLog{iter_, loss->value(0, 0), err_read});
}

void Trainer::run(std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) step();
}

void Trainer::save_state(Archive& archive) const {
  archive.put_meta("state.iter", std::to_string(iter_));
  archive.put_meta("state.mode", train_mode_name(hyper_.mode));
  std::ostringstream rng_state;
  rng_state << rng_;
  archive.put_meta("state.rng", rng_state.str());
  archive.put_array("state.err", Matrix::Constant(1, 1, err_));
  const auto named = model_.named_parameters();
  const auto& vel = opt_.velocities();
  if (!vel.empty()) {
    for (std::size_t i = 0; i < named.size(); ++i)
      archive.put_array("opt.vel." + named[i].first, vel[i]);
  }
}

void Trainer::load_state(const Archive& archive) {
  iter_ = std::stoll(archive.require_meta("state.iter"));
  const std::string mode = archive.require_meta("state.mode");
  if (mode != train_mode_name(hyper_.mode)) {
    throw ConfigError("checkpoint was trained in mode '" + mode +
                      "' but the config requests '" + train_mode_name(hyper_.mode) +
                      "'");
  }
  std::istringstream rng_state(archive.require_meta("state.rng"));
  rng_state >> rng_;
  if (!rng_state) throw IoError("bad RNG state in checkpoint");
  err_ = archive.require_array("state.err")(0, 0);
  const auto named = model_.named_parameters();
  if (archive.has_array("opt.vel." + named.front().first)) {
    std::vector<Matrix> vel;
    vel.reserve(named.size());
    for (const auto& [name, p] : named)
      vel.push_back(archive.require_array("opt.vel." + name));
    opt_.velocities() = std::move(vel);
  }
}

}  // namespace aia
