#pragma once

#include "wgp/fit.hpp"
#include "wgp/kernels.hpp"
#include "wgp/metrics.hpp"
#include "wgp/panel.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace wgp {

struct GroundTruth {
  KernelSpec spec;
  double sigma2 = 0.05;
  InputGrid grid;
  int n_days = 109;
  std::uint64_t seed = 0;
};

// Draws N i.i.d. day vectors from N(0, K_true + sigma2 I). Site ids are
// "S01".., day ids "day-000"..; site means are zero and no split is set.
ErrorPanel sample_panel(const GroundTruth& gt);

// Frozen 27-site layout (longitude, latitude) on an east-west 2:1 rectangle.
std::vector<SiteRecord> study_sites();

struct StudySettings {
  double sigma2 = 0.05;
  double eta = 0.03;
  double rho_s = 1.0;
  double rho_t = 2.0;
  int n_days = 109;
  int n_test_days = 22;
  int n_test_sites = 2;
  double coverage_level = 0.2;
  double interval_level = 0.05;
  OptimizerConfig optimizer;
  int threads = 1;  // across study cells
};

struct StudyFit {
  std::string label;
  ModelConfig config;
  FittedModel model;
  double rmse = 0.0;
  KsResult ks;
  double coverage = 0.0;
  double avg_interval_score = 0.0;
};

struct KernelEvalCell {
  KernelFamily truth;
  double truth_log_likelihood = 0.0;  // at the generating parameters
  StudyFit fit;
};

struct KernelEvalResult {
  std::uint64_t seed = 0;
  double truth_sigma2 = 0.05;
  std::vector<std::string> test_sites;
  std::vector<KernelEvalCell> cells;  // truth-major: SE, M52, M32, M12 x same model order
};

KernelEvalResult kernel_eval_study(std::uint64_t seed, const StudySettings& settings);

enum class WarpCase { W1, W2 };

// Generating warp for each case.
WarpStack warp_case_truth(WarpCase c);

struct WarpRecoveryResult {
  WarpCase which = WarpCase::W1;
  std::uint64_t seed = 0;
  std::vector<std::string> test_sites;
  GroundTruth truth;
  std::vector<StudyFit> fits;  // ordered by decreasing layer count: M2 (W2 only), M1, M0
};

WarpRecoveryResult warp_recovery_study(WarpCase which, std::uint64_t seed, const StudySettings& settings);

std::string kernel_eval_csv(const std::vector<KernelEvalResult>& runs);
std::string warp_recovery_csv(const std::vector<WarpRecoveryResult>& runs);

struct RuleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<RuleCheck> kernel_eval_checks(const std::vector<KernelEvalResult>& runs);
std::vector<RuleCheck> warp_recovery_checks(const std::vector<WarpRecoveryResult>& runs);
nlohmann::json checks_json(const std::vector<RuleCheck>& checks);

}  // namespace wgp
