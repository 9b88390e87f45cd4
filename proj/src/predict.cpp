#include "wgp/predict.hpp"

#include "wgp/error.hpp"
#include "wgp/kernels.hpp"
#include "wgp/linalg.hpp"
#include "wgp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace wgp {

namespace {

void check_targets(const std::vector<SiteHour>& targets, const InputGrid& grid) {
  std::set<std::pair<int, int>> seen;
  for (const auto& t : targets) {
    if (t.site < 0 || t.site >= grid.num_sites() || t.hour < 0 || t.hour >= grid.num_hours())
      throw Error(ErrorCode::OutOfRange, "site/hour index outside the model grid");
    if (!seen.insert({t.site, t.hour}).second)
      throw Error(ErrorCode::DuplicateTarget,
                  "site " + std::to_string(t.site) + " hour " + std::to_string(t.hour) + " listed twice");
  }
}

std::vector<InputPoint> to_points(const std::vector<SiteHour>& where, const InputGrid& grid) {
  std::vector<InputPoint> pts;
  pts.reserve(where.size());
  for (const auto& w : where) pts.push_back(grid.point(w.site, w.hour));
  return pts;
}

void tidy_covariance(Eigen::MatrixXd& cov) {
  cov = (0.5 * (cov + cov.transpose())).eval();
  for (Eigen::Index i = 0; i < cov.rows(); ++i) cov(i, i) = std::max(cov(i, i), 0.0);
}

}  // namespace

Eigen::VectorXd PredictiveDistribution::marginal_variance() const {
  return cov.diagonal().array() + nugget;
}

PredictiveDistribution Conditioner::apply(const Eigen::VectorXd& observed_values) const {
  if (observed_values.size() != static_cast<Eigen::Index>(observed.size()))
    throw Error(ErrorCode::OutOfRange, "observed value count does not match the conditioning set");
  PredictiveDistribution dist;
  dist.targets = targets;
  dist.mean = observed.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()))
                               : Eigen::VectorXd(weights * observed_values);
  dist.cov = cov;
  dist.nugget = nugget;
  return dist;
}

Conditioner make_conditioner(const FittedModel& model, const std::vector<SiteHour>& observed,
                             const std::vector<SiteHour>& targets) {
  if (targets.empty()) throw Error(ErrorCode::EmptyInput, "no prediction targets");
  check_targets(targets, model.grid);
  check_targets(observed, model.grid);
  const auto& spec = model.theta.kernel;
  const auto obs_pts = to_points(observed, model.grid);
  const auto tgt_pts = to_points(targets, model.grid);

  Conditioner c;
  c.observed = observed;
  c.targets = targets;
  c.nugget = model.theta.sigma2;
  c.cov = cross_covariance(tgt_pts, tgt_pts, spec);
  if (!observed.empty()) {
    Eigen::MatrixXd k_obs = cross_covariance(obs_pts, obs_pts, spec);
    k_obs.diagonal().array() += model.theta.sigma2;
    const auto chol = factorize(k_obs);
    const Eigen::MatrixXd k_star = cross_covariance(obs_pts, tgt_pts, spec);
    c.weights = chol.llt.solve(k_star).transpose();
    c.cov -= c.weights * k_star;
  } else {
    c.weights.resize(static_cast<Eigen::Index>(targets.size()), 0);
  }
  tidy_covariance(c.cov);
  return c;
}

PredictiveDistribution posterior_points(const KernelSpec& spec, double sigma2, const std::vector<InputPoint>& observed,
                                        const Eigen::VectorXd& values, const std::vector<InputPoint>& targets) {
  if (targets.empty()) throw Error(ErrorCode::EmptyInput, "no prediction targets");
  if (values.size() != static_cast<Eigen::Index>(observed.size()))
    throw Error(ErrorCode::OutOfRange, "observed value count does not match observed points");
  PredictiveDistribution dist;
  dist.nugget = sigma2;
  dist.cov = cross_covariance(targets, targets, spec);
  if (observed.empty()) {
    dist.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  } else {
    Eigen::MatrixXd k_obs = cross_covariance(observed, observed, spec);
    k_obs.diagonal().array() += sigma2;
    const auto chol = factorize(k_obs);
    const Eigen::MatrixXd k_star = cross_covariance(observed, targets, spec);
    dist.mean = k_star.transpose() * chol.llt.solve(values);
    dist.cov -= k_star.transpose() * chol.llt.solve(k_star);
  }
  tidy_covariance(dist.cov);
  return dist;
}

PredictiveDistribution posterior(const FittedModel& model, const std::vector<Observation>& observed,
                                 const std::vector<SiteHour>& targets) {
  std::vector<SiteHour> where;
  Eigen::VectorXd values(static_cast<Eigen::Index>(observed.size()));
  for (std::size_t i = 0; i < observed.size(); ++i) {
    where.push_back(observed[i].where);
    values(static_cast<Eigen::Index>(i)) = observed[i].value;
  }
  return make_conditioner(model, where, targets).apply(values);
}

TestPredictions test_panel_predictions(const FittedModel& model, const ErrorPanel& panel) {
  if (panel.num_sites() != model.grid.num_sites() || panel.hours != model.grid.num_hours())
    throw Error(ErrorCode::OutOfRange, "panel does not match the model grid");
  TestPredictions out;
  out.sites = panel.test_sites();
  out.days = panel.test_days();
  if (out.sites.empty() || out.days.empty()) throw Error(ErrorCode::EmptyInput, "panel has no test split");
  const int T = panel.hours;

  std::vector<SiteHour> observed;
  for (int m : panel.training_sites())
    for (int t = 0; t < T; ++t) observed.push_back({m, t});
  for (int m : out.sites)
    for (int t = 0; t < T; ++t) out.targets.push_back({m, t});

  const auto cond = make_conditioner(model, observed, out.targets);
  out.sigma = (cond.cov.diagonal().array() + cond.nugget).sqrt();
  const auto n_targets = static_cast<Eigen::Index>(out.targets.size());
  out.mean.resize(n_targets, static_cast<Eigen::Index>(out.days.size()));
  out.actual.resize(n_targets, static_cast<Eigen::Index>(out.days.size()));
  Eigen::VectorXd obs_values(static_cast<Eigen::Index>(observed.size()));
  for (std::size_t j = 0; j < out.days.size(); ++j) {
    const int n = out.days[j];
    for (std::size_t i = 0; i < observed.size(); ++i)
      obs_values(static_cast<Eigen::Index>(i)) = panel.at(observed[i].site, observed[i].hour, n);
    const auto col = static_cast<Eigen::Index>(j);
    out.mean.col(col) = cond.weights * obs_values;
    for (Eigen::Index i = 0; i < n_targets; ++i) {
      const auto& tgt = out.targets[static_cast<std::size_t>(i)];
      out.actual(i, col) = panel.at(tgt.site, tgt.hour, n);
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ b);
}

ScenarioSet sample_scenarios(const PredictiveDistribution& dist, int n_scenarios, std::uint64_t seed,
                             bool include_nugget, int threads) {
  if (n_scenarios < 1) throw Error(ErrorCode::InvalidRange, "need at least one scenario");
  Eigen::MatrixXd cov = dist.cov;
  if (include_nugget) cov.diagonal().array() += dist.nugget;
  const Eigen::MatrixXd root = psd_root(cov);
  const auto dim = dist.mean.size();

  ScenarioSet out;
  out.targets = dist.targets;
  out.seed = seed;
  out.samples.resize(n_scenarios, dim);
  constexpr int kBatch = 256;
  const int batches = (n_scenarios + kBatch - 1) / kBatch;
  parallel_for(batches, threads, [&](int b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(dim);
    for (int i = b * kBatch; i < std::min(n_scenarios, (b + 1) * kBatch); ++i) {
      for (Eigen::Index d = 0; d < dim; ++d) z(d) = normal(rng);
      out.samples.row(i) = (dist.mean + root * z).transpose();
    }
  });
  return out;
}

ScenarioSet to_power_ratio(const ScenarioSet& errors, const Eigen::VectorXd& forecast_ratio,
                           const Eigen::VectorXd& site_mean) {
  if (forecast_ratio.size() != errors.samples.cols() || site_mean.size() != errors.samples.cols())
    throw Error(ErrorCode::OutOfRange, "forecast/mean vectors do not match scenario targets");
  ScenarioSet out = errors;
  for (Eigen::Index j = 0; j < out.samples.cols(); ++j) {
    if (forecast_ratio(j) < 0.0 || forecast_ratio(j) > 1.0)
      throw Error(ErrorCode::OutOfRange, "forecast ratio outside [0,1]");
    out.samples.col(j) = (out.samples.col(j).array() + forecast_ratio(j) + site_mean(j)).cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

std::map<std::string, ZonalSeries> aggregate_zone(const ScenarioSet& ratios, const std::vector<double>& capacity_of_site,
                                                  const std::vector<std::string>& zone_of_site) {
  struct Acc {
    std::map<int, Eigen::VectorXd> weighted;
    std::map<int, double> capacity;
  };
  std::map<std::string, Acc> acc;
  const auto n = ratios.samples.rows();
  for (std::size_t j = 0; j < ratios.targets.size(); ++j) {
    const auto& tgt = ratios.targets[j];
    if (tgt.site < 0 || static_cast<std::size_t>(tgt.site) >= zone_of_site.size() ||
        static_cast<std::size_t>(tgt.site) >= capacity_of_site.size())
      throw Error(ErrorCode::UnknownZone, "target site " + std::to_string(tgt.site) + " has no zone/capacity");
    const auto& zone = zone_of_site[static_cast<std::size_t>(tgt.site)];
    if (zone.empty()) throw Error(ErrorCode::UnknownZone, "target site " + std::to_string(tgt.site) + " has no zone");
    const double cap = capacity_of_site[static_cast<std::size_t>(tgt.site)];
    auto& a = acc[zone];
    auto [it, fresh] = a.weighted.try_emplace(tgt.hour, Eigen::VectorXd::Zero(n));
    it->second += cap * ratios.samples.col(static_cast<Eigen::Index>(j));
    a.capacity[tgt.hour] += cap;
  }
  std::map<std::string, ZonalSeries> out;
  for (auto& [zone, a] : acc) {
    ZonalSeries series;
    series.zone = zone;
    series.ratios.resize(n, static_cast<Eigen::Index>(a.weighted.size()));
    Eigen::Index c = 0;
    for (auto& [hour, sum] : a.weighted) {
      series.hours.push_back(hour);
      series.ratios.col(c++) = sum / a.capacity[hour];
    }
    out.emplace(zone, std::move(series));
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

QuantileBands quantile_bands(const Eigen::MatrixXd& samples, const std::vector<double>& levels) {
  if (samples.rows() < 2) throw Error(ErrorCode::EmptyInput, "quantile bands need at least two scenarios");
  QuantileBands bands;
  bands.levels = levels;
  const auto cols = samples.cols();
  const auto L = static_cast<Eigen::Index>(levels.size());
  bands.lower.resize(cols, L);
  bands.upper.resize(cols, L);
  bands.mean = samples.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < cols; ++j) {
    std::vector<double> col(samples.col(j).data(), samples.col(j).data() + samples.rows());
    std::sort(col.begin(), col.end());
    for (Eigen::Index l = 0; l < L; ++l) {
      const double level = levels[static_cast<std::size_t>(l)];
      if (!(level >= 0.0 && level <= 1.0)) throw Error(ErrorCode::OutOfRange, "band level outside [0,1]");
      bands.lower(j, l) = empirical_quantile(col, (1.0 - level) / 2.0);
      bands.upper(j, l) = empirical_quantile(col, (1.0 + level) / 2.0);
    }
  }
  return bands;
}

}  // namespace wgp
