#include "wgp/kernels.hpp"

#include "wgp/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace wgp {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::M12: return "M12";
    case KernelFamily::M32: return "M32";
    case KernelFamily::M52: return "M52";
    case KernelFamily::SE: return "SE";
  }
  return "?";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "M12") return KernelFamily::M12;
  if (name == "M32") return KernelFamily::M32;
  if (name == "M52") return KernelFamily::M52;
  if (name == "SE") return KernelFamily::SE;
  throw Error(ErrorCode::InvalidConfig, "unknown kernel family '" + std::string(name) + "'");
}

double smoothness(KernelFamily family) {
  switch (family) {
    case KernelFamily::M12: return 0.5;
    case KernelFamily::M32: return 1.5;
    case KernelFamily::M52: return 2.5;
    case KernelFamily::SE: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

void KernelSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::ConstraintViolation, std::string(name) + " must be positive");
  };
  positive(eta, "eta");
  positive(rho_s, "rho_s");
  positive(rho_t, "rho_t");
  positive(rho_p, "rho_p");
  positive(period, "period");
  if (!(eta_p >= 0.0) || !std::isfinite(eta_p)) throw Error(ErrorCode::ConstraintViolation, "eta_p must be >= 0");
  if (spatial_warp.dim != 2 || temporal_warp.dim != 1)
    throw Error(ErrorCode::ConstraintViolation, "spatial warp must be 2-D and temporal warp 1-D");
  spatial_warp.validate();
  temporal_warp.validate();
}

double matern_corr(KernelFamily family, double d, double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidRange, "range parameter must be positive");
  if (!(d >= 0.0)) throw Error(ErrorCode::InvalidRange, "distance must be non-negative");
  const double r = d / rho;
  switch (family) {
    case KernelFamily::M12: return std::exp(-r);
    case KernelFamily::M32: {
      const double z = std::sqrt(3.0) * r;
      return (1.0 + z) * std::exp(-z);
    }
    case KernelFamily::M52: {
      const double z = std::sqrt(5.0) * r;
      return (1.0 + z + 5.0 * r * r / 3.0) * std::exp(-z);
    }
    case KernelFamily::SE: return std::exp(-0.5 * r * r);
  }
  return 0.0;
}

double periodic_corr(double d, double rho_p, double p) {
  if (!(rho_p > 0.0) || !(p > 0.0)) throw Error(ErrorCode::InvalidRange, "periodic parameters must be positive");
  const double s = std::sin(std::numbers::pi * d / (2.0 * p));
  return std::exp(-2.0 / (rho_p * rho_p) * s * s);
}

namespace {

double warp_scalar(const WarpStack& stack, double t) {
  if (stack.empty()) return t;
  Eigen::VectorXd x(1);
  x(0) = t;
  for (const auto& layer : stack.layers) x = apply_layer(layer, x);
  return x(0);
}

double temporal_from_warped(double t_i, double t_j, double g_i, double g_j, const KernelSpec& spec) {
  double k = matern_corr(spec.temporal_family, std::abs(g_i - g_j), spec.rho_t);
  if (spec.eta_p != 0.0) k += spec.eta_p * periodic_corr(std::abs(t_i - t_j), spec.rho_p, spec.period);
  return k;
}

}  // namespace

double temporal_kernel(double t_i, double t_j, const KernelSpec& spec) {
  return temporal_from_warped(t_i, t_j, warp_scalar(spec.temporal_warp, t_i), warp_scalar(spec.temporal_warp, t_j),
                              spec);
}

double spatiotemporal_kernel(const InputPoint& x_i, const InputPoint& x_j, const KernelSpec& spec) {
  Eigen::Vector2d g_i = x_i.s, g_j = x_j.s;
  for (const auto& layer : spec.spatial_warp.layers) {
    g_i = apply_layer(layer, g_i);
    g_j = apply_layer(layer, g_j);
  }
  return spec.eta * matern_corr(spec.spatial_family, (g_i - g_j).norm(), spec.rho_s) *
         temporal_kernel(x_i.t, x_j.t, spec);
}

Eigen::MatrixXd spatial_factor(const Eigen::MatrixX2d& sites, const KernelSpec& spec) {
  const Eigen::MatrixXd warped = warp_batch(spec.spatial_warp, sites);
  const auto M = warped.rows();
  Eigen::MatrixXd K(M, M);
  for (Eigen::Index i = 0; i < M; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = matern_corr(spec.spatial_family, (warped.row(i) - warped.row(j)).norm(), spec.rho_s);
    }
  }
  return K;
}

Eigen::MatrixXd temporal_factor(const Eigen::VectorXd& hours, const KernelSpec& spec) {
  const auto T = hours.size();
  Eigen::VectorXd warped(T);
  for (Eigen::Index j = 0; j < T; ++j) warped(j) = warp_scalar(spec.temporal_warp, hours(j));
  Eigen::MatrixXd K(T, T);
  for (Eigen::Index i = 0; i < T; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = temporal_from_warped(hours(i), hours(j), warped(i), warped(j), spec);
    }
  }
  return K;
}

Eigen::MatrixXd build_covariance(const InputGrid& grid, const KernelSpec& spec) {
  const Eigen::MatrixXd ks = spatial_factor(grid.spatial, spec);
  const Eigen::MatrixXd kt = temporal_factor(grid.temporal, spec);
  const auto M = ks.rows();
  const auto T = kt.rows();
  Eigen::MatrixXd K(M * T, M * T);
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = 0; b < M; ++b) K.block(a * T, b * T, T, T) = (spec.eta * ks(a, b)) * kt;
  return K;
}

Eigen::MatrixXd cross_covariance(const std::vector<InputPoint>& a, const std::vector<InputPoint>& b,
                                 const KernelSpec& spec) {
  auto warp_all = [&spec](const std::vector<InputPoint>& pts) {
    std::vector<InputPoint> out = pts;
    for (auto& p : out) {
      for (const auto& layer : spec.spatial_warp.layers) p.s = apply_layer(layer, p.s);
    }
    return out;
  };
  const auto wa = warp_all(a);
  const auto wb = warp_all(b);
  std::vector<double> ga(a.size()), gb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ga[i] = warp_scalar(spec.temporal_warp, a[i].t);
  for (std::size_t j = 0; j < b.size(); ++j) gb[j] = warp_scalar(spec.temporal_warp, b[j].t);

  Eigen::MatrixXd K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double ks = matern_corr(spec.spatial_family, (wa[i].s - wb[j].s).norm(), spec.rho_s);
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          spec.eta * ks * temporal_from_warped(a[i].t, b[j].t, ga[i], gb[j], spec);
    }
  }
  return K;
}

}  // namespace wgp
