#pragma once

#include "wgp/likelihood.hpp"
#include "wgp/panel.hpp"
#include "wgp/params.hpp"

#include <cstdint>
#include <vector>

namespace wgp {

struct OptimizerConfig {
  double learning_rate = 0.05;
  int max_iters = 2000;
  double convergence_tol = 1e-7;  // relative loss change over `convergence_window` iterations
  int convergence_window = 20;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int restart_cap = 16;  // maximum number of weight sign patterns tried
  // Iterations during which warp parameters stay at their start while the
  // kernel and nugget adapt; ends early once that phase converges.
  int warmup_iters = 300;
  GradientMode gradient_mode = GradientMode::Hybrid;
  double fd_step = 1e-5;
  int threads = 1;

  void validate() const;
};

struct RestartSummary {
  std::vector<int> signs;  // +1 / -1 per warp weight, in parameter-layout order
  double initial_log_likelihood = 0.0;
  double final_log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string failure;
};

struct FittedModel {
  ModelConfig config;
  ParameterVector theta;
  InputGrid grid;
  double log_likelihood = 0.0;
  double training_loss = 0.0;  // -log_likelihood
  double bic = 0.0;
  int train_days = 0;
  int iterations = 0;
  std::vector<double> loss_trace;  // winning restart
  std::vector<RestartSummary> restarts;
  std::uint64_t seed = 0;
};

// Starting values before the warp weight signs are applied; `days` is the
// training slice used for the variance-based defaults.
ParameterVector initial_parameters(const ModelConfig& config, const Eigen::MatrixXd& days,
                                   const std::vector<int>& signs);

// Sign patterns to try for `n_weights` warp weights: all 2^n when that fits
// within `cap`, else a seeded random subset of `cap` distinct patterns.
std::vector<std::vector<int>> sign_patterns(int n_weights, int cap, std::uint64_t seed);

struct AdamResult {
  Eigen::VectorXd u;  // best iterate
  double log_likelihood = 0.0;
  std::vector<double> loss_trace;
  int iterations = 0;
  bool converged = false;
};

// Maximizes the log-likelihood from `u0` with Adam in unconstrained coordinates.
AdamResult run_adam(const Eigen::VectorXd& u0, const ModelConfig& config, const InputGrid& grid,
                    const Eigen::MatrixXd& days, const OptimizerConfig& opt);

FittedModel fit(const ErrorPanel& panel, const ModelConfig& config, const OptimizerConfig& opt, std::uint64_t seed);

// Same, on an explicit grid and training slice.
FittedModel fit(const InputGrid& grid, const Eigen::MatrixXd& days, const ModelConfig& config,
                const OptimizerConfig& opt, std::uint64_t seed);

// -l + |wS| ln(M)/2 + |wT| ln(T)/2 + |k| ln(M T)/2, with the nugget counted in |k|.
double modified_bic(double log_likelihood, const ModelConfig& config, int sites, int hours);
double modified_bic(const FittedModel& model, int sites, int hours);

}  // namespace wgp
