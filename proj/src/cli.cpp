#include "aia/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "aia/bench.hpp"
#include "aia/evaluate.hpp"
#include "aia/run_config.hpp"

namespace aia {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

RunConfig load_config(const CommonOpts& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.world.seed = *opts.seed;
  }
  if (opts.output_dir) cfg.output_dir = *opts.output_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Run config (JSON)")->required();
  cmd->add_option("--seed", [&opts](const std::vector<std::string>& vals) {
        opts.seed = std::stoull(vals.at(0));
        return true;
      },
      "Override the config seed");
  cmd->add_option("--output-dir", [&opts](const std::vector<std::string>& vals) {
        opts.output_dir = vals.at(0);
        return true;
      },
      "Override the config output directory");
}

int cmd_generate(const RunConfig& cfg, const std::string& out_override) {
  Dataset data = generate_dataset(cfg.world);
  fs::create_directories(cfg.output_dir);
  const std::string out =
      out_override.empty() ? cfg.output_dir + "/dataset.bin" : out_override;
  save_dataset(data, out);
  std::cout << "wrote " << out << " (videos=" << cfg.world.n_videos
            << " clips=" << cfg.world.clips_per_video << " seed=" << cfg.world.seed
            << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool resume) {
  fs::create_directories(cfg.output_dir);
  const std::string model_path = cfg.output_dir + "/model.ckpt";
  const std::string pool_path = cfg.output_dir + "/pool.ckpt";
  const std::string metrics_path = cfg.output_dir + "/metrics.csv";

  Dataset data = generate_dataset(cfg.world);
  Model model = build_model(cfg.model_config(), cfg.seed + 1);
  MemoryPool pool(cfg.memory_capacity, cfg.ia.d, cfg.trainer.window);
  if (resume) {
    pool = load_pool(pool_path);
    if (pool.capacity() != cfg.memory_capacity || pool.dim() != cfg.ia.d ||
        pool.window() != cfg.trainer.window) {
      throw ConfigError("pool checkpoint geometry does not match the config");
    }
  }
  Trainer trainer(model, pool, data, cfg.trainer, cfg.seed + 2);
  bool append_metrics = false;
  if (resume) {
    Archive archive = load_archive(model_path);
    load_model_into(model, archive);
    trainer.load_state(archive);
    append_metrics = fs::exists(metrics_path);
  }

  const std::int64_t remaining =
      std::max<std::int64_t>(0, cfg.trainer.iters - trainer.iterations_done());
  trainer.run(remaining);

  std::ofstream csv(metrics_path,
                    append_metrics ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot open metrics file: " + metrics_path);
  if (!append_metrics) csv << "iteration,loss,err\n";
  for (const auto& row : trainer.log()) {
    csv << row.iter << "," << fmt_double(row.loss) << "," << fmt_double(row.err_read)
        << "\n";
  }
  csv.close();

  Archive archive;
  archive.put_meta("config.seed", std::to_string(cfg.seed));
  save_model(model, archive);
  trainer.save_state(archive);
  save_archive(archive, model_path);
  save_pool(pool, pool_path);
  std::cout << "trained " << trainer.iterations_done() << " iterations ("
            << train_mode_name(cfg.trainer.mode) << "), checkpoint " << model_path
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& dataset_path) {
  Archive archive = load_archive(checkpoint_path);
  Model model = load_model(archive);
  Dataset data = dataset_path.empty() ? generate_dataset(cfg.world)
                                      : load_dataset(dataset_path);
  if (model.config.d_in != data.config.d_in()) {
    throw ConfigError("checkpoint d_in " + std::to_string(model.config.d_in) +
                      " does not match the dataset d_in " +
                      std::to_string(data.config.d_in()));
  }
  auto split = data.eval_split();
  if (split.empty()) {
    throw ConfigError("eval split is empty (world.eval_videos is 0)");
  }
  EvalReport report =
      evaluate_map(model, data, split, cfg.trainer.window, cfg.memory_capacity);

  nlohmann::json j;
  j["per_class_ap"] = report.ap;
  j["map"] = report.map;
  j["instances"] = report.instances;
  j["eval_videos"] = static_cast<int>(split.size());
  const std::string text = j.dump(2);
  fs::create_directories(cfg.output_dir);
  const std::string out = cfg.output_dir + "/eval.json";
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw IoError("cannot open eval report file: " + out);
  file << text << "\n";
  std::cout << text << "\n";
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const std::string out = cfg.output_dir + "/bench.csv";
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw IoError("cannot open bench file: " + out);
  csv << "mode,window,encoder_passes,macs_encoder,macs_total,peak_live_encoder,"
         "peak_live_total\n";
  auto emit = [&](const ResourceReport& r) {
    csv << train_mode_name(r.mode) << "," << r.window << "," << r.encoder_passes
        << "," << r.macs_encoder << "," << r.macs_total << ","
        << r.peak_live_encoder << "," << r.peak_live_total << "\n";
  };
  for (int l : cfg.bench.l_grid) {
    emit(count_resources(TrainMode::kAmu, l, cfg.world, cfg.ia, cfg.bench.iterations));
  }
  for (int l : cfg.bench.l_grid) {
    if (l > kJointWindowGuard) continue;  // joint rows stop at the guard
    emit(count_resources(TrainMode::kJoint, l, cfg.world, cfg.ia, cfg.bench.iterations));
  }
  csv.close();
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_attn(const RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& dataset_path, std::int64_t video,
             std::int64_t clip) {
  Archive archive = load_archive(checkpoint_path);
  Model model = load_model(archive);
  Dataset data = dataset_path.empty() ? generate_dataset(cfg.world)
                                      : load_dataset(dataset_path);
  auto records = attention_for_clip(model, data, video, clip, cfg.trainer.window,
                                    cfg.memory_capacity);
  fs::create_directories(cfg.output_dir);
  for (const auto& rec : records) {
    const std::string path = cfg.output_dir + "/attn_block" +
                             std::to_string(rec.block_index) + "_" +
                             block_kind_char(rec.kind) + ".csv";
    std::ofstream csv(path, std::ios::trunc);
    if (!csv) throw IoError("cannot open attention file: " + path);
    csv << "query";
    for (int k : rec.valid_keys) csv << ",key" << k;
    csv << "\n";
    for (int q : rec.valid_queries) {
      csv << "q" << q;
      for (int k : rec.valid_keys) csv << "," << fmt_double(rec.map(q, k));
      csv << "\n";
    }
  }
  std::cout << "wrote " << records.size() << " attention maps to " << cfg.output_dir
            << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Interaction-aggregation action detection on a synthetic world"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, bench_opts, attn_opts;
  std::string gen_out, eval_ckpt, eval_data, attn_ckpt, attn_data;
  bool resume = false;
  std::int64_t attn_video = 0, attn_clip = 1;

  CLI::App* gen = app.add_subcommand("generate", "Generate the synthetic dataset");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "Dataset output path");

  CLI::App* train = app.add_subcommand("train", "Train (amu or joint mode)");
  add_common(train, train_opts);
  train->add_flag("--resume", resume, "Continue from the output-dir checkpoint");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate mAP on the held-out split");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--dataset", eval_data, "Dataset file (default: regenerate)");

  CLI::App* bench = app.add_subcommand("bench", "Resource usage over the L grid");
  add_common(bench, bench_opts);

  CLI::App* attn = app.add_subcommand("attn", "Dump per-block attention maps");
  add_common(attn, attn_opts);
  attn->add_option("--checkpoint", attn_ckpt, "Model checkpoint")->required();
  attn->add_option("--dataset", attn_data, "Dataset file (default: regenerate)");
  attn->add_option("--video", attn_video, "Video id")->required();
  attn->add_option("--clip", attn_clip, "Clip index (1-based)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(load_config(gen_opts), gen_out);
    if (train->parsed()) return cmd_train(load_config(train_opts), resume);
    if (eval->parsed()) return cmd_eval(load_config(eval_opts), eval_ckpt, eval_data);
    if (bench->parsed()) return cmd_bench(load_config(bench_opts));
    if (attn->parsed()) {
      return cmd_attn(load_config(attn_opts), attn_ckpt, attn_data, attn_video,
                      attn_clip);
    }
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace aia
