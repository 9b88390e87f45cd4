#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <vector>

namespace wgp {

// Standard normal CDF and quantile.
double normal_cdf(double z);
double normal_quantile(double p);

double rmse(std::span<const double> predicted, std::span<const double> actual);

std::vector<double> pit(std::span<const double> actual, std::span<const double> mean, std::span<const double> sigma);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample KS test against Uniform(0,1).
KsResult ks_uniform(std::span<const double> q);

// Asymptotic Kolmogorov tail probability Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda);

// Fraction of PIT values with alpha/2 <= q <= 1 - alpha/2 (closed band).
double coverage(std::span<const double> q, double alpha);

// Interval score of the central (1 - alpha) interval [lower, upper].
double interval_score(double y, double lower, double upper, double alpha);
// Gaussian interval mu -/+ z_{alpha/2} sigma, averaged over cells.
double avg_interval_score(std::span<const double> actual, std::span<const double> mean,
                          std::span<const double> sigma, double alpha);

struct MetricsReport {
  double rmse = 0.0;
  KsResult ks;
  std::map<double, double> coverage;        // level alpha -> C_alpha
  std::map<double, double> avg_interval_score;  // level alpha -> AvgIS_alpha
  int sites = 0;
  int hours = 0;
  int days = 0;
};

MetricsReport evaluate_metrics(std::span<const double> actual, std::span<const double> mean,
                               std::span<const double> sigma, const std::vector<double>& coverage_levels,
                               const std::vector<double>& interval_levels);

}  // namespace wgp
