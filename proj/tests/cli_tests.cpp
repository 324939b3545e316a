// End-to-end checks of the gmpo_lab command-line surface: flag handling,
// output tree layout, exit codes, and byte-level determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = GMPO_CLI_PATH;

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gmpo_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// small but real training config
void write_tiny_config(const fs::path& path) {
  std::ofstream out(path);
  out << R"({
    "group_size": 4,
    "prompts_per_round": 4,
    "inner_updates": 2,
    "step_size": 1.0,
    "total_rounds": 3,
    "seed": 11,
    "policy": {"buckets": 256, "context_order": 1},
    "task": {"name": "parity", "alphabet": 2, "target_min": 2,
             "target_max": 3, "prompt_count": 4, "max_len": 5, "seed": 2}
  })";
}

}  // namespace

TEST_CASE("train: deterministic re-run produces identical output trees") {
  const auto dir = temp_dir("det");
  write_tiny_config(dir / "config.json");
  REQUIRE(run("train --config " + (dir / "config.json").string() +
              " --objective GMPO --seed 5 --out " + (dir / "a").string()) == 0);
  REQUIRE(run("train --config " + (dir / "config.json").string() +
              " --objective GMPO --seed 5 --out " + (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a/telemetry.csv") == slurp(dir / "b/telemetry.csv"));
  CHECK(slurp(dir / "a/checkpoint.txt") == slurp(dir / "b/checkpoint.txt"));
  CHECK(slurp(dir / "a/resolved_config.json") ==
        slurp(dir / "b/resolved_config.json"));
  fs::remove_all(dir);
}

TEST_CASE("train: objective-specific clip defaults land in the resolved config") {
  const auto dir = temp_dir("defaults");
  write_tiny_config(dir / "config.json");

  REQUIRE(run("train --config " + (dir / "config.json").string() +
              " --objective GMPO --out " + (dir / "gmpo").string()) == 0);
  auto resolved = nlohmann::json::parse(slurp(dir / "gmpo/resolved_config.json"));
  CHECK(resolved["clip"]["lower_log"].get<double>() == doctest::Approx(-0.4));
  CHECK(resolved["clip"]["upper_log"].get<double>() == doctest::Approx(0.4));
  CHECK(resolved["clip"]["mode"] == "token");

  REQUIRE(run("train --config " + (dir / "config.json").string() +
              " --objective GRPO --out " + (dir / "grpo").string()) == 0);
  resolved = nlohmann::json::parse(slurp(dir / "grpo/resolved_config.json"));
  CHECK(resolved["clip"]["lower_log"].get<double>() ==
        doctest::Approx(std::log(0.8)));
  CHECK(resolved["clip"]["upper_log"].get<double>() ==
        doctest::Approx(std::log(1.2)));

  // resolved config is itself a valid input config
  REQUIRE(run("train --config " + (dir / "gmpo/resolved_config.json").string() +
              " --out " + (dir / "rerun").string()) == 0);
  CHECK(slurp(dir / "rerun/telemetry.csv") == slurp(dir / "gmpo/telemetry.csv"));
  fs::remove_all(dir);
}

TEST_CASE("train: bad config gives usage exit code") {
  const auto dir = temp_dir("badcfg");
  std::ofstream(dir / "bad.json") << "{\"objective\": \"PPO\"}";
  CHECK(run("train --config " + (dir / "bad.json").string() + " --out " +
            (dir / "out").string()) == 1);
  CHECK(run("train") == 1);  // missing required --out
  CHECK(run("bogus-subcommand") == 1);
  fs::remove_all(dir);
}

TEST_CASE("checks: pass with defaults, usage error on zero instances") {
  CHECK(run("amgm-check --instances 2000 --seed 3") == 0);
  CHECK(run("grad-check --instances 25 --seed 3") == 0);
  CHECK(run("amgm-check --instances 0") == 1);
  CHECK(run("grad-check --instances 0") == 1);
}

TEST_CASE("report: smoothing and envelope files") {
  const auto dir = temp_dir("report");
  write_tiny_config(dir / "config.json");
  REQUIRE(run("train --config " + (dir / "config.json").string() +
              " --objective GMPO --out " + (dir / "run").string()) == 0);

  REQUIRE(run("report --in " + (dir / "run").string() +
              " --metric mean_entropy --smooth 1 --out " +
              (dir / "plots").string()) == 0);
  CHECK(fs::exists(dir / "plots/run_mean_entropy.tsv"));

  REQUIRE(run("report --in " + (dir / "run").string() +
              " --metric ratio_log_max --smooth 2 --out " +
              (dir / "plots").string()) == 0);
  CHECK(fs::exists(dir / "plots/run_ratio_log_max.tsv"));
  CHECK(fs::exists(dir / "plots/run_ratio_envelope.tsv"));

  CHECK(run("report --in " + (dir / "run").string() +
            " --metric not_a_metric --out " + (dir / "plots").string()) == 1);
  fs::remove_all(dir);
}

TEST_CASE("ablate: emits the objective and threshold sweep cells") {
  const auto dir = temp_dir("ablate");
  write_tiny_config(dir / "config.json");
  REQUIRE(run("ablate --config " + (dir / "config.json").string() + " --out " +
              (dir / "sweep").string()) == 0);

  for (const char* cell :
       {"obj_grpo", "obj_gmpo_noclip", "obj_gmpo_seqclip", "obj_gmpo_nonorm",
        "obj_gmpo", "clip_0.2", "clip_0.4", "clip_0.8", "clip_inf"}) {
    CHECK(fs::exists(dir / "sweep" / cell / "telemetry.csv"));
    CHECK(fs::exists(dir / "sweep" / cell / "resolved_config.json"));
  }
  CHECK(fs::exists(dir / "sweep/summary.csv"));

  // the GMPO default cell is shared between the two sweeps
  CHECK(slurp(dir / "sweep/obj_gmpo/telemetry.csv") ==
        slurp(dir / "sweep/clip_0.4/telemetry.csv"));

  // unclipped cell never clips
  std::ifstream csv(dir / "sweep/clip_inf/telemetry.csv");
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string cell_val;
    for (int i = 0; i < 8; ++i) std::getline(ss, cell_val, ',');
    CHECK(cell_val == "0");
  }
  fs::remove_all(dir);
}
