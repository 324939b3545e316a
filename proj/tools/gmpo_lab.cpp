#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmpo/config.hpp"
#include "gmpo/oracle.hpp"
#include "gmpo/report.hpp"
#include "gmpo/telemetry.hpp"
#include "gmpo/trainer.hpp"

namespace fs = std::filesystem;
using namespace gmpo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCheckFailure = 2;
constexpr int kExitRuntime = 3;

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("GMPO_OUT_ROOT")) p = fs::path(root) / p;
  }
  return p;
}

struct TrainFlags {
  std::string config_path;
  std::string objective;
  std::optional<double> clip_lower;
  std::optional<double> clip_upper;
  std::optional<double> grpo_clip_eps;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Default clip range per objective, applied only when neither the config
// file nor the flags pin one.
ClipConfig default_clip(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Grpo: return ClipConfig::grpo_linear(0.2);
    case ObjectiveKind::GmpoSeqClip: return ClipConfig::sequence_log(-0.4, 0.4);
    case ObjectiveKind::GmpoNoClip: return ClipConfig::none();
    default: return ClipConfig::token_log(-0.4, 0.4);
  }
}

TrainConfig resolve_train_config(const TrainFlags& flags) {
  TrainConfig config;
  bool config_has_clip = false;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in)
      throw std::invalid_argument("cannot open config: " + flags.config_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    config = parse_config_json(text);
    config_has_clip = nlohmann::json::parse(text).contains("clip");
  }

  if (!flags.objective.empty())
    config.objective = objective_kind_from_string(flags.objective);
  if (flags.seed) config.seed = *flags.seed;

  const bool clip_flags =
      flags.clip_lower || flags.clip_upper || flags.grpo_clip_eps;
  if (flags.grpo_clip_eps) {
    if (flags.clip_lower || flags.clip_upper)
      throw std::invalid_argument(
          "--grpo-clip-eps conflicts with --clip-lower/--clip-upper");
    config.clip = ClipConfig::grpo_linear(*flags.grpo_clip_eps);
  } else if (clip_flags) {
    ClipConfig cc = config_has_clip ? config.clip : default_clip(config.objective);
    if (flags.clip_lower) cc.lower_log = *flags.clip_lower;
    if (flags.clip_upper) cc.upper_log = *flags.clip_upper;
    cc.mode = config.objective == ObjectiveKind::GmpoSeqClip
                  ? ClipMode::Sequence
                  : ClipMode::Token;
    cc.validate();
    config.clip = cc;
  } else if (!config_has_clip) {
    config.clip = default_clip(config.objective);
  }
  config.validate();
  return config;
}

void run_one_training(const TrainConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_resolved_config(config, out_dir / "resolved_config.json");

  const TrainResult result = train(config);
  write_csv(result.telemetry, out_dir / "telemetry.csv");
  save_checkpoint(result.params, out_dir / "checkpoint.txt");

  nlohmann::json summary;
  summary["final_mean_reward"] = result.final_mean_reward;
  summary["pass_at_1"] = result.pass_at_1;
  summary["updates"] = result.telemetry.size();
  summary["rounds"] = config.total_rounds;
  std::ofstream out(out_dir / "summary.json", std::ios::binary);
  out << summary.dump(2) << '\n';
}

int cmd_train(const TrainFlags& flags) {
  const TrainConfig config = resolve_train_config(flags);
  run_one_training(config, resolve_out(flags.out));
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& out) {
  TrainFlags base_flags;
  base_flags.config_path = config_path;
  TrainConfig base = resolve_train_config(base_flags);

  struct Cell {
    std::string name;
    ObjectiveKind kind;
    ClipConfig clip;
  };
  std::vector<Cell> cells = {
      {"obj_grpo", ObjectiveKind::Grpo, ClipConfig::grpo_linear(0.2)},
      {"obj_gmpo_noclip", ObjectiveKind::GmpoNoClip, ClipConfig::none()},
      {"obj_gmpo_seqclip", ObjectiveKind::GmpoSeqClip,
       ClipConfig::sequence_log(-0.4, 0.4)},
      {"obj_gmpo_nonorm", ObjectiveKind::GmpoNoNorm,
       ClipConfig::token_log(-0.4, 0.4)},
      {"obj_gmpo", ObjectiveKind::Gmpo, ClipConfig::token_log(-0.4, 0.4)},
      {"clip_0.2", ObjectiveKind::Gmpo, ClipConfig::token_log(-0.2, 0.2)},
      {"clip_0.4", ObjectiveKind::Gmpo, ClipConfig::token_log(-0.4, 0.4)},
      {"clip_0.8", ObjectiveKind::Gmpo, ClipConfig::token_log(-0.8, 0.8)},
      {"clip_inf", ObjectiveKind::Gmpo, ClipConfig::none()},
  };

  const fs::path out_dir = resolve_out(out);
  fs::create_directories(out_dir);

  std::ofstream summary(out_dir / "summary.csv", std::ios::binary);
  summary << "cell,objective,clip_lower_log,clip_upper_log,final_mean_reward,"
             "pass_at_1,mean_envelope_width,mean_clip_fraction\n";

  for (const Cell& cell : cells) {
    TrainConfig config = base;  // shared seeds across cells
    config.objective = cell.kind;
    config.clip = cell.clip;
    const fs::path cell_dir = out_dir / cell.name;
    run_one_training(config, cell_dir);

    const auto series = read_csv(cell_dir / "telemetry.csv");
    double width = 0.0, clip_frac = 0.0, reward = 0.0;
    for (const auto& s : series) {
      width += s.ratio_log_max - s.ratio_log_min;
      clip_frac += s.clip_fraction;
      reward = s.mean_reward;
    }
    if (!series.empty()) {
      width /= series.size();
      clip_frac /= series.size();
    }
    const auto pass =
        nlohmann::json::parse(std::ifstream(cell_dir / "summary.json"));
    summary << cell.name << ',' << to_string(cell.kind) << ','
            << cell.clip.lower_log << ',' << cell.clip.upper_log << ','
            << reward << ',' << pass["pass_at_1"].get<double>() << ',' << width
            << ',' << clip_frac << '\n';
  }
  return kExitOk;
}

int cmd_grad_check(int instances, std::uint64_t seed) {
  const auto report = oracle::grad_check_sweep(instances, seed);
  std::cout << "grad-check: instances=" << instances
            << " max_rel_error=" << report.max_rel_error
            << " clipped_fraction=" << report.clipped_instance_fraction << '\n';
  if (report.max_rel_error >= 1e-6) {
    std::cout << "FAIL worst instance (seed " << report.worst_instance_seed
              << "): " << report.worst_instance << '\n';
    return kExitCheckFailure;
  }
  std::cout << "PASS\n";
  return kExitOk;
}

int cmd_amgm_check(int instances, std::uint64_t seed) {
  const auto report = oracle::amgm_sweep(instances, seed);
  std::cout << "amgm-check: instances=" << instances
            << " worst_margin=" << report.worst_margin
            << " worst_equality_gap=" << report.worst_equality_gap << '\n';
  if (!report.pass) {
    std::cout << "FAIL (seed " << report.fail_seed << "): "
              << report.fail_instance << '\n';
    return kExitCheckFailure;
  }
  std::cout << "PASS\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& in_dirs,
               const std::string& metric, int smooth, const std::string& out) {
  const fs::path out_dir = resolve_out(out);
  fs::create_directories(out_dir);
  for (const std::string& dir : in_dirs) {
    const fs::path in_dir(dir);
    const auto series = read_csv(in_dir / "telemetry.csv");
    const std::string base = in_dir.filename().empty()
                                 ? in_dir.parent_path().filename().string()
                                 : in_dir.filename().string();
    const auto values =
        moving_average(extract_metric(series, metric), smooth);
    write_series(out_dir / (base + "_" + metric + ".tsv"), values);

    if (metric == "ratio_log_min" || metric == "ratio_log_max") {
      const auto lo =
          moving_average(extract_metric(series, "ratio_log_min"), smooth);
      const auto hi =
          moving_average(extract_metric(series, "ratio_log_max"), smooth);
      write_envelope(out_dir / (base + "_ratio_envelope.tsv"), lo, hi);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-optimization laboratory for geometric- and "
               "arithmetic-mean clipped surrogate objectives"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Run one training experiment");
  train_cmd->add_option("--config", tf.config_path, "JSON config file");
  train_cmd->add_option("--objective", tf.objective,
                        "GRPO|GMPO|GMPO_NOCLIP|GMPO_SEQCLIP|GMPO_NONORM");
  double cl = 0, cu = 0, ge = 0;
  std::uint64_t seed_flag = 0;
  auto* cl_opt = train_cmd->add_option("--clip-lower", cl,
                                       "log-space lower clip threshold");
  auto* cu_opt = train_cmd->add_option("--clip-upper", cu,
                                       "log-space upper clip threshold");
  auto* ge_opt = train_cmd->add_option(
      "--grpo-clip-eps", ge, "linear-space eps: clip range (1-eps, 1+eps)");
  auto* seed_opt = train_cmd->add_option("--seed", seed_flag, "rng seed");
  train_cmd->add_option("--out", tf.out, "output directory")->required();

  std::string ab_config, ab_out;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Objective and threshold sweeps");
  ablate_cmd->add_option("--config", ab_config, "JSON config file");
  ablate_cmd->add_option("--out", ab_out, "output directory")->required();

  int gc_instances = 100;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand(
      "grad-check", "Finite-difference check of the analytic gradients");
  gc_cmd->add_option("--instances", gc_instances, "random instances");
  gc_cmd->add_option("--seed", gc_seed, "rng seed");

  int am_instances = 10000;
  std::uint64_t am_seed = 1;
  auto* am_cmd = app.add_subcommand(
      "amgm-check", "Geometric-vs-arithmetic mean dominance sweep");
  am_cmd->add_option("--instances", am_instances, "random instances");
  am_cmd->add_option("--seed", am_seed, "rng seed");

  std::vector<std::string> rp_in;
  std::string rp_metric, rp_out = ".";
  int rp_smooth = 1;
  auto* rp_cmd =
      app.add_subcommand("report", "Emit plot-ready per-metric data files");
  rp_cmd->add_option("--in", rp_in, "run directories with telemetry.csv")
      ->required();
  rp_cmd->add_option("--metric", rp_metric, "metric column name")->required();
  rp_cmd->add_option("--smooth", rp_smooth, "moving-average window");
  rp_cmd->add_option("--out", rp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(train_cmd)) {
      if (*cl_opt) tf.clip_lower = cl;
      if (*cu_opt) tf.clip_upper = cu;
      if (*ge_opt) tf.grpo_clip_eps = ge;
      if (*seed_opt) tf.seed = seed_flag;
      return cmd_train(tf);
    }
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(ab_config, ab_out);
    if (app.got_subcommand(gc_cmd)) {
      if (gc_instances < 1) {
        std::cerr << "grad-check: --instances must be >= 1\n";
        return kExitUsage;
      }
      return cmd_grad_check(gc_instances, gc_seed);
    }
    if (app.got_subcommand(am_cmd)) {
      if (am_instances < 1) {
        std::cerr << "amgm-check: --instances must be >= 1\n";
        return kExitUsage;
      }
      return cmd_amgm_check(am_instances, am_seed);
    }
    if (app.got_subcommand(rp_cmd)) {
      if (rp_smooth < 1) {
        std::cerr << "report: --smooth must be >= 1\n";
        return kExitUsage;
      }
      return cmd_report(rp_in, rp_metric, rp_smooth, rp_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "abort: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
