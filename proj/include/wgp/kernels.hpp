#pragma once

#include "wgp/panel.hpp"
#include "wgp/warping.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace wgp {

enum class KernelFamily { M12, M32, M52, SE };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);
double smoothness(KernelFamily family);  // nu; infinity for SE

// Separable warped kernel
//   k((s,t),(s',t')) = eta * kS(|gS(s)-gS(s')|) * (kT(|gT(t)-gT(t')|) + eta_p * kP(|t-t'|))
// Component correlations carry unit variance, so the diagonal is eta * (1 + eta_p).
struct KernelSpec {
  double eta = 1.0;
  KernelFamily spatial_family = KernelFamily::SE;
  double rho_s = 1.0;
  KernelFamily temporal_family = KernelFamily::M32;
  double rho_t = 1.0;
  double eta_p = 0.0;  // zero disables the periodic add-on
  double rho_p = 1.0;
  double period = 0.5;
  WarpStack spatial_warp{2, {}};
  WarpStack temporal_warp{1, {}};

  void validate() const;
};

double matern_corr(KernelFamily family, double d, double rho);

// exp(-(2 / rho_p^2) sin^2(pi d / (2 p))); period in d is 2p.
double periodic_corr(double d, double rho_p, double p);

double temporal_kernel(double t_i, double t_j, const KernelSpec& spec);

double spatiotemporal_kernel(const InputPoint& x_i, const InputPoint& x_j, const KernelSpec& spec);

// M x M warped spatial correlation factor.
Eigen::MatrixXd spatial_factor(const Eigen::MatrixX2d& sites, const KernelSpec& spec);
// T x T temporal factor including the periodic add-on.
Eigen::MatrixXd temporal_factor(const Eigen::VectorXd& hours, const KernelSpec& spec);

// Full (M*T) x (M*T) covariance without nugget, ordered site-major, hour-minor.
// Assembled as eta * (K_S kron K_T).
Eigen::MatrixXd build_covariance(const InputGrid& grid, const KernelSpec& spec);

Eigen::MatrixXd cross_covariance(const std::vector<InputPoint>& a, const std::vector<InputPoint>& b,
                                 const KernelSpec& spec);

}  // namespace wgp
