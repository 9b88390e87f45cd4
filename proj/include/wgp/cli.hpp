#pragma once

#include "wgp/fit.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wgp {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  struct Data {
    std::filesystem::path panel_csv;
    std::filesystem::path bundle_dir;  // defaults to the output directory
    std::filesystem::path model_path;  // defaults to <out>/model.json
    int hours = 24;
    std::vector<std::string> exclude_sites;
    double epsilon_margin = 0.05;
  } data;

  struct Split {
    std::vector<std::string> test_sites;  // explicit ids win over counts
    std::vector<std::string> test_days;
    int n_test_sites = 0;
    int n_test_days = 0;
    std::optional<std::uint64_t> seed;  // falls back to the run seed
  } split;

  std::string model_name = "SE-0-0";
  bool periodic = true;
  OptimizerConfig optimizer;

  std::vector<double> coverage_levels{0.2};
  std::vector<double> interval_levels{0.05};

  struct Simulate {
    std::string day;
    std::string mode = "unconditional";  // or "conditional"
    std::vector<std::string> targets;    // empty: every site
    std::vector<std::string> observed;   // conditional mode; empty: every non-target site
    std::vector<std::string> zones;      // empty: every zone among the targets
    int n_scenarios = 1000;
    std::vector<double> band_levels{0.1, 0.2, 0.5};
    bool include_nugget = true;
  } simulate;

  struct Synth {
    std::string study = "kernel_eval";  // kernel_eval, w1, w2
    std::vector<std::uint64_t> seeds{1, 2, 3};
  } synth;

  struct Variogram {
    int max_lag = -1;  // negative: T - 1
    std::map<std::string, std::string> grouping;  // site id -> region
  } variogram;

  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out = "out";
};

// Relative paths are resolved against `base_dir`. Unknown keys throw InvalidConfig.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Command implementations; each writes its files under `cfg.out`.
void cmd_ingest(const RunConfig& cfg);
void cmd_fit(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_synth(const RunConfig& cfg);
void cmd_variogram(const RunConfig& cfg);

// Entry point used by the `wgp` executable. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace wgp
