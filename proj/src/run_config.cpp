#include "aia/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace aia {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown config key '" + ctx + "." + key + "'");
  }
}

const json& require_field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError("missing config field '" + ctx + "." + key + "'");
  }
  return *it;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& ctx) {
  try {
    return require_field(j, key, ctx).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + ctx + "." + std::string(key) +
                      "': " + e.what());
  }
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.d_in = world.d_in();
  mc.n_classes = kClassCount;
  mc.ia = ia;
  return mc;
}

void RunConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  world.validate();
  ia.validate();
  trainer.validate();
  if (memory_capacity < 1) throw ConfigError("memory.capacity must be >= 1");
  if (bench.iterations < 1) throw ConfigError("bench.iterations must be >= 1");
  for (int l : bench.l_grid)
    if (l < 0) throw ConfigError("bench.l_grid entries must be >= 0");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "output_dir", "world", "ia", "trainer", "memory", "bench"},
             "config");
  RunConfig cfg;
  cfg.seed = get_field<std::uint64_t>(j, "seed", "config");
  cfg.output_dir = get_field<std::string>(j, "output_dir", "config");

  const json& jw = require_field(j, "world", "config");
  check_keys(jw,
             {"videos", "eval_videos", "clips_per_video", "persons_per_clip",
              "objects_per_clip", "attr_dim", "noise_sigma", "temporal_lag"},
             "world");
  cfg.world.n_videos = get_field<int>(jw, "videos", "world");
  cfg.world.eval_videos = get_field<int>(jw, "eval_videos", "world");
  cfg.world.clips_per_video = get_field<int>(jw, "clips_per_video", "world");
  cfg.world.persons_per_clip = get_field<int>(jw, "persons_per_clip", "world");
  cfg.world.objects_per_clip = get_field<int>(jw, "objects_per_clip", "world");
  cfg.world.attr_dim = get_field<int>(jw, "attr_dim", "world");
  cfg.world.noise_sigma = get_field<double>(jw, "noise_sigma", "world");
  cfg.world.temporal_lag = get_field<int>(jw, "temporal_lag", "world");
  cfg.world.seed = cfg.seed;

  const json& ji = require_field(j, "ia", "config");
  check_keys(ji, {"structure", "order", "repeats", "feature_dim", "ffn_enabled",
                  "ffn_hidden"},
             "ia");
  cfg.ia.structure = ia_structure_from_name(get_field<std::string>(ji, "structure", "ia"));
  cfg.ia.order = parse_order(get_field<std::string>(ji, "order", "ia"));
  cfg.ia.repeats = get_field<int>(ji, "repeats", "ia");
  cfg.ia.d = get_field<int>(ji, "feature_dim", "ia");
  cfg.ia.ffn_enabled = get_field<bool>(ji, "ffn_enabled", "ia");
  cfg.ia.ffn_hidden = ji.contains("ffn_hidden") ? get_field<int>(ji, "ffn_hidden", "ia") : 0;

  const json& jt = require_field(j, "trainer", "config");
  check_keys(jt, {"mode", "lr", "momentum", "iters", "batch", "window"}, "trainer");
  cfg.trainer.mode = train_mode_from_name(get_field<std::string>(jt, "mode", "trainer"));
  cfg.trainer.lr = get_field<double>(jt, "lr", "trainer");
  cfg.trainer.momentum = get_field<double>(jt, "momentum", "trainer");
  cfg.trainer.iters = get_field<std::int64_t>(jt, "iters", "trainer");
  cfg.trainer.batch = get_field<int>(jt, "batch", "trainer");
  cfg.trainer.window = get_field<int>(jt, "window", "trainer");

  const json& jm = require_field(j, "memory", "config");
  check_keys(jm, {"capacity"}, "memory");
  cfg.memory_capacity = get_field<int>(jm, "capacity", "memory");

  if (j.contains("bench")) {
    const json& jb = j["bench"];
    check_keys(jb, {"l_grid", "iterations"}, "bench");
    cfg.bench.l_grid = get_field<std::vector<int>>(jb, "l_grid", "bench");
    cfg.bench.iterations = get_field<int>(jb, "iterations", "bench");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["world"] = {{"videos", world.n_videos},
                {"eval_videos", world.eval_videos},
                {"clips_per_video", world.clips_per_video},
                {"persons_per_clip", world.persons_per_clip},
                {"objects_per_clip", world.objects_per_clip},
                {"attr_dim", world.attr_dim},
                {"noise_sigma", world.noise_sigma},
                {"temporal_lag", world.temporal_lag}};
  j["ia"] = {{"structure", ia_structure_name(ia.structure)},
             {"order", order_string(ia.order)},
             {"repeats", ia.repeats},
             {"feature_dim", ia.d},
             {"ffn_enabled", ia.ffn_enabled},
             {"ffn_hidden", ia.ffn_hidden}};
  j["trainer"] = {{"mode", train_mode_name(trainer.mode)},
                  {"lr", trainer.lr},
                  {"momentum", trainer.momentum},
                  {"iters", trainer.iters},
                  {"batch", trainer.batch},
                  {"window", trainer.window}};
  j["memory"] = {{"capacity", memory_capacity}};
  j["bench"] = {{"l_grid", bench.l_grid}, {"iterations", bench.iterations}};
  return j.dump(2);
}

}  // namespace aia
