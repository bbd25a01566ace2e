#include "aia/bench.hpp"

#include <algorithm>

namespace aia {

namespace {

std::int64_t median(std::vector<std::int64_t> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

}  // namespace

ResourceReport count_resources(TrainMode mode, int window, const WorldConfig& world,
                               const IAConfig& ia, int iterations) {
  if (iterations < 1) throw ConfigError("bench iterations must be >= 1");
  Dataset data = generate_dataset(world);

  ModelConfig mc;
  mc.d_in = world.d_in();
  mc.n_classes = kClassCount;
  mc.ia = ia;
  Model model = build_model(mc, world.seed + 1);

  TrainHyper hyper;
  hyper.mode = mode;
  hyper.window = window;
  hyper.iters = iterations;
  MemoryPool pool(4, mc.d(), window);
  Trainer trainer(model, pool, data, hyper, world.seed + 2);

  // Interior clips keep every joint window inside the video, so encoder
  // counts depend on L only through the 2L+1 replication.
  const int T = world.clips_per_video;
  const int margin = std::min(kJointWindowGuard, (T - 1) / 2);
  std::vector<MemoryKey> schedule;
  for (int i = 0; i < iterations; ++i) {
    const std::int64_t v = i % world.train_videos();
    const std::int64_t t = 1 + margin + i % std::max(1, T - 2 * margin);
    schedule.push_back(MemoryKey{v, t});
  }
  trainer.set_schedule(std::move(schedule));

  auto& meter = ResourceMeter::instance();
  meter.enable();
  std::vector<std::int64_t> macs_total, macs_enc, passes;
  std::int64_t peak_total = 0, peak_enc = 0;
  std::int64_t last_total = 0, last_enc = 0, last_passes = 0;
  for (int i = 0; i < iterations; ++i) {
    meter.rebase_peaks();
    trainer.run(1);
    macs_total.push_back(meter.macs_total() - last_total);
    macs_enc.push_back(meter.macs(Phase::kEncoder) - last_enc);
    passes.push_back(meter.encoder_passes() - last_passes);
    last_total = meter.macs_total();
    last_enc = meter.macs(Phase::kEncoder);
    last_passes = meter.encoder_passes();
    peak_total = std::max(peak_total, meter.peak_total());
    peak_enc = std::max(peak_enc, meter.peak(Phase::kEncoder));
  }
  meter.disable();

  ResourceReport report;
  report.mode = mode;
  report.window = window;
  report.encoder_passes = median(passes);
  report.macs_total = median(macs_total);
  report.macs_encoder = median(macs_enc);
  report.peak_live_total = peak_total;
  report.peak_live_encoder = peak_enc;
  return report;
}

}  // namespace aia
