#include "wgp/fit.hpp"

#include "wgp/error.hpp"
#include "wgp/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace wgp {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be at least 1");
  if (convergence_window < 1) throw Error(ErrorCode::InvalidConfig, "convergence_window must be at least 1");
  if (restart_cap < 1) throw Error(ErrorCode::InvalidConfig, "restart_cap must be at least 1");
  if (warmup_iters < 0) throw Error(ErrorCode::InvalidConfig, "warmup_iters must be non-negative");
  if (!(fd_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "fd_step must be positive");
}

ParameterVector initial_parameters(const ModelConfig& config, const Eigen::MatrixXd& days,
                                   const std::vector<int>& signs) {
  config.validate();
  if (static_cast<int>(signs.size()) != config.warp_weight_count())
    throw Error(ErrorCode::InvalidConfig, "sign pattern length does not match warp weights");
  const double mean = days.mean();
  double var = days.size() > 1 ? (days.array() - mean).square().sum() / static_cast<double>(days.size() - 1) : 1.0;
  if (!(var > 0.0)) var = 1.0;

  ParameterVector theta;
  auto& k = theta.kernel;
  k.spatial_family = config.spatial_family;
  k.temporal_family = config.temporal_family;
  k.eta = var;
  k.rho_s = 0.2;
  k.rho_t = 0.2;
  k.eta_p = config.periodic ? 0.1 : 0.0;
  k.rho_p = 1.0;
  k.period = 0.5;
  theta.sigma2 = 0.1 * var;

  const double negative_start = 0.5 * kWarpWeightLower;
  const double positive_start = 0.5 * kWarpWeightUpper;
  auto start = [&](int s) { return s < 0 ? negative_start : positive_start; };
  std::size_t w = 0;
  for (int l = 0; l < config.spatial_layers; ++l) {
    RbfLayer layer;
    layer.weights = Eigen::Vector2d(start(signs[w]), start(signs[w + 1]));
    w += 2;
    layer.center = Eigen::Vector2d(0.5, 0.5);
    layer.scale = 0.25;
    k.spatial_warp.layers.push_back(layer);
  }
  for (int l = 0; l < config.temporal_layers; ++l) {
    RbfLayer layer;
    layer.weights = Eigen::VectorXd::Constant(1, start(signs[w++]));
    layer.center = Eigen::VectorXd::Constant(1, 0.5);
    layer.scale = 0.25;
    k.temporal_warp.layers.push_back(layer);
  }
  return theta;
}

std::vector<std::vector<int>> sign_patterns(int n_weights, int cap, std::uint64_t seed) {
  if (n_weights < 0 || n_weights > 30) throw Error(ErrorCode::InvalidConfig, "unsupported warp weight count");
  const std::uint64_t total = std::uint64_t{1} << n_weights;
  std::vector<std::uint64_t> codes;
  if (total <= static_cast<std::uint64_t>(cap)) {
    codes.resize(total);
    std::iota(codes.begin(), codes.end(), std::uint64_t{0});
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    while (static_cast<int>(codes.size()) < cap) {
      const auto c = pick(rng);
      if (std::find(codes.begin(), codes.end(), c) == codes.end()) codes.push_back(c);
    }
    std::sort(codes.begin(), codes.end());
  }
  std::vector<std::vector<int>> out;
  for (auto code : codes) {
    std::vector<int> signs(static_cast<std::size_t>(n_weights));
    // bit i set -> weight i starts negative
    for (int i = 0; i < n_weights; ++i) signs[static_cast<std::size_t>(i)] = (code >> i) & 1U ? -1 : 1;
    out.push_back(std::move(signs));
  }
  return out;
}

AdamResult run_adam(const Eigen::VectorXd& u0, const ModelConfig& config, const InputGrid& grid,
                    const Eigen::MatrixXd& days, const OptimizerConfig& opt) {
  opt.validate();
  AdamResult result;
  Eigen::VectorXd u = u0;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(u.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(u.size());
  double best = -std::numeric_limits<double>::infinity();
  result.u = u0;

  // Warp coordinates sit between the kernel block and the trailing nugget.
  const int n_warp = config.spatial_warp_param_count() + config.temporal_warp_param_count();
  const Eigen::Index warp_begin = config.kernel_param_count() - 1;
  bool warming = n_warp > 0 && opt.warmup_iters > 0;
  int step = 0;
  int phase_start = 0;

  for (int it = 1; it <= opt.max_iters; ++it) {
    LikelihoodEval eval;
    try {
      eval = evaluate(u, config, grid, days, opt.gradient_mode, opt.fd_step);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveDefinite || it == 1) throw;
      spdlog::warn("adam stopped at iteration {}: {}", it, e.what());
      break;
    }
    result.iterations = it;
    result.loss_trace.push_back(-eval.value);
    if (eval.value > best) {
      best = eval.value;
      result.u = u;
    }
    const auto& trace = result.loss_trace;
    bool settled = false;
    if (static_cast<int>(trace.size()) - phase_start > opt.convergence_window) {
      const double now = trace.back();
      const double then = trace[trace.size() - 1 - static_cast<std::size_t>(opt.convergence_window)];
      settled = std::abs(then - now) <= opt.convergence_tol * std::max(std::abs(now), 1e-300);
    }
    if (warming && (settled || it > opt.warmup_iters)) {
      // Release the warp from the current point with fresh moments.
      warming = false;
      settled = false;
      step = 0;
      phase_start = static_cast<int>(trace.size());
      m.setZero();
      v.setZero();
      u = result.u;
      continue;
    }
    if (settled) {
      result.converged = true;
      break;
    }
    if (it == opt.max_iters) break;

    // Ascent on l is descent on the loss -l.
    Eigen::VectorXd g = -eval.gradient;
    if (warming) g.segment(warp_begin, n_warp).setZero();
    ++step;
    m = opt.adam_beta1 * m + (1.0 - opt.adam_beta1) * g;
    v = opt.adam_beta2 * v + (1.0 - opt.adam_beta2) * g.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(opt.adam_beta1, step);
    const double bc2 = 1.0 - std::pow(opt.adam_beta2, step);
    u.array() -= opt.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.adam_eps);
  }
  result.log_likelihood = best;
  return result;
}

FittedModel fit(const InputGrid& grid, const Eigen::MatrixXd& days, const ModelConfig& config,
                const OptimizerConfig& opt, std::uint64_t seed) {
  config.validate();
  opt.validate();
  const auto patterns = sign_patterns(config.warp_weight_count(), opt.restart_cap, seed);

  struct StartOutcome {
    RestartSummary summary;
    AdamResult adam;
  };
  std::vector<StartOutcome> outcomes(patterns.size());
  parallel_for(static_cast<int>(patterns.size()), opt.threads, [&](int i) {
    auto& out = outcomes[static_cast<std::size_t>(i)];
    out.summary.signs = patterns[static_cast<std::size_t>(i)];
    try {
      const auto theta0 = initial_parameters(config, days, out.summary.signs);
      const auto u0 = to_unconstrained(theta0, config);
      out.summary.initial_log_likelihood = log_likelihood(theta0, grid, days);
      out.adam = run_adam(u0, config, grid, days, opt);
      out.summary.final_log_likelihood = out.adam.log_likelihood;
      out.summary.iterations = out.adam.iterations;
      out.summary.converged = out.adam.converged;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveDefinite) throw;
      out.summary.failed = true;
      out.summary.failure = e.what();
    }
  });

  int best = -1;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].summary.failed) continue;
    if (best < 0 || outcomes[i].adam.log_likelihood > outcomes[static_cast<std::size_t>(best)].adam.log_likelihood)
      best = static_cast<int>(i);
  }
  if (best < 0) throw Error(ErrorCode::AllStartsFailed, "every optimizer start failed to factorize");

  const auto& winner = outcomes[static_cast<std::size_t>(best)];
  FittedModel model;
  model.config = config;
  model.theta = from_unconstrained(winner.adam.u, config);
  model.grid = grid;
  model.log_likelihood = log_likelihood(model.theta, grid, days);
  model.training_loss = -model.log_likelihood;
  model.train_days = static_cast<int>(days.cols());
  model.iterations = winner.adam.iterations;
  model.loss_trace = winner.adam.loss_trace;
  model.seed = seed;
  for (auto& o : outcomes) model.restarts.push_back(o.summary);
  model.bic = modified_bic(model, grid.num_sites(), grid.num_hours());
  return model;
}

FittedModel fit(const ErrorPanel& panel, const ModelConfig& config, const OptimizerConfig& opt, std::uint64_t seed) {
  return fit(panel.grid, panel.training_matrix(), config, opt, seed);
}

double modified_bic(double log_likelihood, const ModelConfig& config, int sites, int hours) {
  return -log_likelihood + config.spatial_warp_param_count() * std::log(static_cast<double>(sites)) / 2.0 +
         config.temporal_warp_param_count() * std::log(static_cast<double>(hours)) / 2.0 +
         config.kernel_param_count() * std::log(static_cast<double>(sites) * hours) / 2.0;
}

double modified_bic(const FittedModel& model, int sites, int hours) {
  return modified_bic(model.log_likelihood, model.config, sites, hours);
}

}  // namespace wgp
