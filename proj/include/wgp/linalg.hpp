#pragma once

#include <Eigen/Dense>

namespace wgp {

struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // diagonal loading that was needed, 0 if none

  double log_det() const;
};

// Cholesky with escalating diagonal jitter: 0, then 1e-10, 1e-9, ..., 1e-6.
// Throws NotPositiveDefinite when every level fails.
CholeskyFactor factorize(const Eigen::MatrixXd& a);

// Returns L with L L^T = a for a symmetric positive semidefinite matrix.
// Tries a plain Cholesky first and falls back to pivoted LDL^T with tiny
// negative pivots clamped to zero, so singular covariances are sampled
// exactly. Throws NotPositiveDefinite on a materially negative pivot.
Eigen::MatrixXd psd_root(const Eigen::MatrixXd& a);

}  // namespace wgp
