#pragma once

#include "wgp/fit.hpp"
#include "wgp/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wgp {

struct SiteHour {
  int site = 0;
  int hour = 0;
  friend bool operator==(const SiteHour&, const SiteHour&) = default;
};

struct PredictiveDistribution {
  std::vector<SiteHour> targets;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // latent posterior covariance, without the nugget
  double nugget = 0.0;

  // diag(cov) + nugget
  Eigen::VectorXd marginal_variance() const;
};

// Linear map from observed values to the posterior mean plus the (day
// independent) posterior covariance, so many days can share one solve.
struct Conditioner {
  std::vector<SiteHour> observed;
  std::vector<SiteHour> targets;
  Eigen::MatrixXd weights;  // targets x observed, K_*^T (K + sigma2 I)^-1
  Eigen::MatrixXd cov;      // K_** - K_*^T (K + sigma2 I)^-1 K_*
  double nugget = 0.0;

  PredictiveDistribution apply(const Eigen::VectorXd& observed_values) const;
};

Conditioner make_conditioner(const FittedModel& model, const std::vector<SiteHour>& observed,
                             const std::vector<SiteHour>& targets);

// Gaussian conditioning on arbitrary input points; the general form behind
// posterior() and make_conditioner().
PredictiveDistribution posterior_points(const KernelSpec& spec, double sigma2, const std::vector<InputPoint>& observed,
                                        const Eigen::VectorXd& values, const std::vector<InputPoint>& targets);

struct Observation {
  SiteHour where;
  double value = 0.0;
};

PredictiveDistribution posterior(const FittedModel& model, const std::vector<Observation>& observed,
                                 const std::vector<SiteHour>& targets);

struct TestPredictions {
  std::vector<int> sites;      // test site indices
  std::vector<int> days;       // test day indices
  std::vector<SiteHour> targets;
  Eigen::MatrixXd mean;        // targets x days
  Eigen::MatrixXd actual;      // targets x days
  Eigen::VectorXd sigma;       // per target, sqrt(diag + nugget); identical across days
};

// For every test day, condition on all hours of all training sites and
// predict all hours of the test sites.
TestPredictions test_panel_predictions(const FittedModel& model, const ErrorPanel& panel);

struct ScenarioSet {
  Eigen::MatrixXd samples;  // n_scenarios x n_targets
  std::vector<SiteHour> targets;
  std::string conditioning;  // "unconditional" or a description of the observed set
  std::uint64_t seed = 0;
};

ScenarioSet sample_scenarios(const PredictiveDistribution& dist, int n_scenarios, std::uint64_t seed,
                             bool include_nugget = true, int threads = 1);

// clamp(y + forecast_ratio + site_mean, 0, 1) per target column.
ScenarioSet to_power_ratio(const ScenarioSet& errors, const Eigen::VectorXd& forecast_ratio,
                           const Eigen::VectorXd& site_mean);

struct ZonalSeries {
  std::string zone;
  std::vector<int> hours;
  Eigen::MatrixXd ratios;  // n_scenarios x hours
};

// Capacity-weighted average of ratio-space scenarios per zone and hour.
// `zone_of_site` and `capacity_of_site` are indexed by site.
std::map<std::string, ZonalSeries> aggregate_zone(const ScenarioSet& ratios, const std::vector<double>& capacity_of_site,
                                                  const std::vector<std::string>& zone_of_site);

// Empirical quantile with linear interpolation between order statistics
// (position (n-1) p in the sorted sample).
double empirical_quantile(std::vector<double> values, double p);

struct QuantileBands {
  std::vector<double> levels;
  Eigen::MatrixXd lower;  // columns x levels, at (1 - level)/2
  Eigen::MatrixXd upper;  // columns x levels, at (1 + level)/2
  Eigen::VectorXd mean;   // per column
};

QuantileBands quantile_bands(const Eigen::MatrixXd& samples, const std::vector<double>& levels);

// Stream-splitting helper: mixes a master seed with labels (SplitMix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace wgp
