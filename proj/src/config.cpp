#include "gmpo/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gmpo {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
  }
}

ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "token") return ClipMode::Token;
  if (s == "sequence") return ClipMode::Sequence;
  if (s == "none") return ClipMode::None;
  throw std::invalid_argument("config: unknown clip mode '" + s + "'");
}

std::string clip_mode_to_string(ClipMode m) {
  switch (m) {
    case ClipMode::Token: return "token";
    case ClipMode::Sequence: return "sequence";
    case ClipMode::None: return "none";
  }
  throw std::logic_error("unknown clip mode");
}

double json_threshold(const json& v) {
  // infinite thresholds are spelled as strings in JSON
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf" || s == "+inf")
      return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("config: bad clip threshold '" + s + "'");
  }
  return v.get<double>();
}

json threshold_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

TrainConfig parse_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }

  reject_unknown(root, {"schema_version", "objective", "clip", "group_size",
                        "prompts_per_round", "inner_updates", "step_size",
                        "momentum", "total_rounds", "sample_temperature",
                        "seed", "policy", "task", "advantage_std"},
                 "top level");
  if (root.contains("schema_version") && root["schema_version"] != 1)
    throw std::invalid_argument("config: unsupported schema_version");
  if (root.contains("advantage_std") && root["advantage_std"] != "population")
    throw std::invalid_argument("config: only population std is supported");

  TrainConfig c;
  if (root.contains("objective"))
    c.objective = objective_kind_from_string(root["objective"]);
  if (root.contains("group_size")) c.group_size = root["group_size"];
  if (root.contains("prompts_per_round"))
    c.prompts_per_round = root["prompts_per_round"];
  if (root.contains("inner_updates")) c.inner_updates = root["inner_updates"];
  if (root.contains("step_size")) c.step_size = root["step_size"];
  if (root.contains("momentum")) c.momentum = root["momentum"];
  if (root.contains("total_rounds")) c.total_rounds = root["total_rounds"];
  if (root.contains("sample_temperature"))
    c.sample_temperature = root["sample_temperature"];
  if (root.contains("seed")) c.seed = root["seed"].get<std::uint64_t>();

  if (root.contains("clip")) {
    const json& clip = root["clip"];
    reject_unknown(clip, {"mode", "lower_log", "upper_log"}, "clip");
    ClipConfig cc;
    cc.mode = clip.contains("mode") ? clip_mode_from_string(clip["mode"])
                                    : ClipMode::Token;
    if (clip.contains("lower_log")) cc.lower_log = json_threshold(clip["lower_log"]);
    if (clip.contains("upper_log")) cc.upper_log = json_threshold(clip["upper_log"]);
    cc.validate();
    c.clip = cc;
  }

  if (root.contains("policy")) {
    const json& pol = root["policy"];
    reject_unknown(pol, {"buckets", "context_order"}, "policy");
    if (pol.contains("buckets")) c.policy_buckets = pol["buckets"];
    if (pol.contains("context_order")) c.context_order = pol["context_order"];
  }

  if (root.contains("task")) {
    const json& task = root["task"];
    reject_unknown(task, {"name", "alphabet", "target_min", "target_max",
                          "prompt_count", "max_len", "seed"},
                   "task");
    if (task.contains("name")) c.task.name = task["name"];
    if (task.contains("alphabet")) c.task.alphabet = task["alphabet"];
    if (task.contains("target_min")) c.task.target_min = task["target_min"];
    if (task.contains("target_max")) c.task.target_max = task["target_max"];
    if (task.contains("prompt_count")) c.task.prompt_count = task["prompt_count"];
    if (task.contains("max_len")) c.task.max_len = task["max_len"];
    if (task.contains("seed")) c.task.seed = task["seed"].get<std::uint64_t>();
  }

  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const TrainConfig& c) {
  json root;
  root["schema_version"] = 1;
  root["objective"] = to_string(c.objective);
  root["clip"] = {{"mode", clip_mode_to_string(c.clip.mode)},
                  {"lower_log", threshold_json(c.clip.lower_log)},
                  {"upper_log", threshold_json(c.clip.upper_log)}};
  root["group_size"] = c.group_size;
  root["prompts_per_round"] = c.prompts_per_round;
  root["inner_updates"] = c.inner_updates;
  root["step_size"] = c.step_size;
  root["momentum"] = c.momentum;
  root["total_rounds"] = c.total_rounds;
  root["sample_temperature"] = c.sample_temperature;
  root["seed"] = c.seed;
  root["policy"] = {{"buckets", c.policy_buckets},
                    {"context_order", c.context_order}};
  root["task"] = {{"name", c.task.name},
                  {"alphabet", c.task.alphabet},
                  {"target_min", c.task.target_min},
                  {"target_max", c.task.target_max},
                  {"prompt_count", c.task.prompt_count},
                  {"max_len", c.task.max_len},
                  {"seed", c.task.seed}};
  root["advantage_std"] = "population";
  return root.dump(2) + "\n";
}

void write_resolved_config(const TrainConfig& config,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("config: cannot write " + path.string());
  out << config_to_json(config);
}

}  // namespace gmpo
