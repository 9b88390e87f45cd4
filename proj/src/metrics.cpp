#include "wgp/metrics.hpp"

#include "wgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wgp {

namespace {

void same_length(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::OutOfRange, "metric inputs differ in length");
  if (a == 0) throw Error(ErrorCode::EmptyInput, "metric inputs are empty");
}

}  // namespace

// erfc-based; absolute error is at the level of double rounding.
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Acklam's rational approximation (relative error 1.15e-9) followed by one
// Halley step against normal_cdf, which brings the error to ~1e-15.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::OutOfRange, "normal quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  same_length(predicted.size(), actual.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

std::vector<double> pit(std::span<const double> actual, std::span<const double> mean, std::span<const double> sigma) {
  same_length(actual.size(), mean.size());
  same_length(actual.size(), sigma.size());
  std::vector<double> q(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw Error(ErrorCode::NonpositiveSigma, "predictive sigma must be positive");
    q[i] = normal_cdf((actual[i] - mean[i]) / sigma[i]);
  }
  return q;
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // The alternating series converges slowly for small lambda, where Q ~ 1.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-10) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniform(std::span<const double> q) {
  if (q.empty()) throw Error(ErrorCode::EmptyInput, "KS test needs at least one value");
  std::vector<double> sorted(q.begin(), q.end());
  for (double v : sorted)
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::OutOfRange, "PIT value outside [0,1]");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double above = (static_cast<double>(i) + 1.0) / n - sorted[i];
    const double below = sorted[i] - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  const double sqrt_n = std::sqrt(n);
  return KsResult{d, kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

double coverage(std::span<const double> q, double alpha) {
  if (q.empty()) throw Error(ErrorCode::EmptyInput, "coverage of an empty sample");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::OutOfRange, "coverage level must lie in [0,1)");
  const double lo = alpha / 2.0;
  const double hi = 1.0 - alpha / 2.0;
  const auto inside = std::count_if(q.begin(), q.end(), [&](double v) { return v >= lo && v <= hi; });
  return static_cast<double>(inside) / static_cast<double>(q.size());
}

double interval_score(double y, double lower, double upper, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::OutOfRange, "interval level must lie in (0,1)");
  double score = upper - lower;
  if (y < lower) score += 2.0 / alpha * (lower - y);
  if (y > upper) score += 2.0 / alpha * (y - upper);
  return score;
}

double avg_interval_score(std::span<const double> actual, std::span<const double> mean,
                          std::span<const double> sigma, double alpha) {
  same_length(actual.size(), mean.size());
  same_length(actual.size(), sigma.size());
  const double z = normal_quantile(1.0 - alpha / 2.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw Error(ErrorCode::NonpositiveSigma, "predictive sigma must be positive");
    sum += interval_score(actual[i], mean[i] - z * sigma[i], mean[i] + z * sigma[i], alpha);
  }
  return sum / static_cast<double>(actual.size());
}

MetricsReport evaluate_metrics(std::span<const double> actual, std::span<const double> mean,
                               std::span<const double> sigma, const std::vector<double>& coverage_levels,
                               const std::vector<double>& interval_levels) {
  MetricsReport report;
  report.rmse = rmse(mean, actual);
  const auto q = pit(actual, mean, sigma);
  report.ks = ks_uniform(q);
  for (double a : coverage_levels) report.coverage[a] = coverage(q, a);
  for (double a : interval_levels) report.avg_interval_score[a] = avg_interval_score(actual, mean, sigma, a);
  return report;
}

}  // namespace wgp
