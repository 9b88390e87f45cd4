#pragma once

#include "oracles.hpp"

#include "wgp/fit.hpp"
#include "wgp/kernels.hpp"
#include "wgp/panel.hpp"

#include <random>

namespace testing {

inline int family_code(wgp::KernelFamily f) {
  switch (f) {
    case wgp::KernelFamily::M12: return 0;
    case wgp::KernelFamily::M32: return 1;
    case wgp::KernelFamily::M52: return 2;
    case wgp::KernelFamily::SE: return 3;
  }
  return 3;
}

inline std::vector<oracle::Layer> layers_of(const wgp::WarpStack& s) {
  std::vector<oracle::Layer> out;
  for (const auto& l : s.layers)
    out.push_back({{l.weights.data(), l.weights.data() + l.weights.size()},
                   {l.center.data(), l.center.data() + l.center.size()},
                   l.scale});
  return out;
}

// Kernel value from the oracle formulas.
inline double kernel(const wgp::KernelSpec& k, double s1x, double s1y, double t1, double s2x, double s2y, double t2) {
  const auto ws = layers_of(k.spatial_warp);
  const auto wt = layers_of(k.temporal_warp);
  const auto a = oracle::warp(ws, {s1x, s1y});
  const auto b = oracle::warp(ws, {s2x, s2y});
  const double ds = std::hypot(a[0] - b[0], a[1] - b[1]);
  const double ta = oracle::warp(wt, {t1})[0];
  const double tb = oracle::warp(wt, {t2})[0];
  const double kt = oracle::corr(family_code(k.temporal_family), std::abs(ta - tb), k.rho_t) +
                    k.eta_p * oracle::periodic(std::abs(t1 - t2), k.rho_p, k.period);
  return k.eta * oracle::corr(family_code(k.spatial_family), ds, k.rho_s) * kt;
}

// Double-loop covariance in site-major, hour-minor order.
inline Eigen::MatrixXd covariance(const wgp::InputGrid& g, const wgp::KernelSpec& k) {
  const int M = g.num_sites(), T = g.num_hours();
  Eigen::MatrixXd K(M * T, M * T);
  for (int m = 0; m < M; ++m)
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < M; ++n)
        for (int u = 0; u < T; ++u)
          K(m * T + t, n * T + u) = kernel(k, g.spatial(m, 0), g.spatial(m, 1), g.temporal(t), g.spatial(n, 0),
                                           g.spatial(n, 1), g.temporal(u));
  return K;
}

inline wgp::InputGrid random_grid(std::mt19937_64& rng, int M, int T) {
  std::uniform_real_distribution<double> lon(-102.0, -100.0), lat(31.0, 33.0);
  std::vector<wgp::SiteRecord> sites;
  for (int m = 0; m < M; ++m) sites.push_back({"S" + std::to_string(m), lon(rng), lat(rng), "", 100.0});
  return wgp::normalize_inputs(sites, T, 0.05);
}

inline wgp::RbfLayer random_layer(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> w(-0.8, 1.8), c(0.1, 0.9), a(0.15, 0.5);
  wgp::RbfLayer l;
  l.weights.resize(dim);
  l.center.resize(dim);
  for (int d = 0; d < dim; ++d) {
    l.weights(d) = w(rng);
    l.center(d) = c(rng);
  }
  l.scale = a(rng);
  return l;
}

inline wgp::KernelFamily random_family(std::mt19937_64& rng) {
  return static_cast<wgp::KernelFamily>(std::uniform_int_distribution<int>(0, 3)(rng));
}

inline wgp::ParameterVector random_theta(std::mt19937_64& rng, const wgp::ModelConfig& cfg) {
  std::uniform_real_distribution<double> eta(0.02, 1.0), rho(0.1, 1.5), s2(0.01, 0.3), ep(0.05, 0.6),
      per(0.3, 0.8);
  wgp::ParameterVector th;
  auto& k = th.kernel;
  k.spatial_family = cfg.spatial_family;
  k.temporal_family = cfg.temporal_family;
  k.eta = eta(rng);
  k.rho_s = rho(rng);
  k.rho_t = rho(rng);
  k.eta_p = cfg.periodic ? ep(rng) : 0.0;
  k.rho_p = rho(rng) + 0.3;
  k.period = per(rng);
  for (int l = 0; l < cfg.spatial_layers; ++l) k.spatial_warp.layers.push_back(random_layer(rng, 2));
  for (int l = 0; l < cfg.temporal_layers; ++l) k.temporal_warp.layers.push_back(random_layer(rng, 1));
  th.sigma2 = s2(rng);
  return th;
}

inline Eigen::MatrixXd random_days(std::mt19937_64& rng, int rows, int cols, double scale = 0.5) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::MatrixXd y(rows, cols);
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) = z(rng);
  return y;
}

inline double max_rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing
