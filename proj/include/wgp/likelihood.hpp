#pragma once

#include "wgp/panel.hpp"
#include "wgp/params.hpp"

#include <Eigen/Dense>

namespace wgp {

enum class GradientMode { Hybrid, FullFd };

// Dense: one Cholesky of the (M*T) x (M*T) covariance. Kronecker: exact
// evaluation through eigendecompositions of the M x M and T x T factors,
// valid because training slices always cover the full site x hour grid.
enum class Backend { Dense, Kronecker };

// Replicated-day Gaussian log-likelihood of the columns of `days`
// ((M*T) x N) under covariance K + sigma2 I built on `grid`.
double log_likelihood(const ParameterVector& theta, const InputGrid& grid, const Eigen::MatrixXd& days);

// Uses the panel's training slice (all sites, training days).
double log_likelihood(const ParameterVector& theta, const ErrorPanel& panel);

struct LikelihoodEval {
  double value = 0.0;
  Eigen::VectorXd gradient;  // d l / d u in unconstrained coordinates
};

// Value and gradient with respect to the unconstrained vector `u`.
//
// Hybrid: dl/du_j = 1/2 <A A^T - N Kinv, dK/du_j> with A = Kinv Y, where the
// kernel-matrix derivative comes from central differences of the spatial and
// temporal factors (K = eta K_S kron K_T + sigma2 I, each parameter touches a
// single factor). FullFd: central differences of l itself.
LikelihoodEval evaluate(const Eigen::VectorXd& u, const ModelConfig& config, const InputGrid& grid,
                        const Eigen::MatrixXd& days, GradientMode mode = GradientMode::Hybrid,
                        double fd_step = 1e-5, Backend backend = Backend::Kronecker);

Eigen::VectorXd gradient(const ParameterVector& theta, const ModelConfig& config, const ErrorPanel& panel,
                         GradientMode mode = GradientMode::Hybrid);

}  // namespace wgp
