#include "wgp/linalg.hpp"

#include "wgp/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace wgp {

double CholeskyFactor::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

CholeskyFactor factorize(const Eigen::MatrixXd& a) {
  CholeskyFactor f;
  f.llt.compute(a);
  if (f.llt.info() == Eigen::Success) return f;
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd loaded = a;
    loaded.diagonal().array() += jitter;
    f.llt.compute(loaded);
    spdlog::debug("cholesky retry with jitter {:g}", jitter);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "covariance of size " + std::to_string(a.rows()) + " is not positive definite after jitter 1e-6");
}

Eigen::MatrixXd psd_root(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "LDLT factorization failed");
  Eigen::VectorXd d = ldlt.vectorD();
  const double tol = 1e-10 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i) < -tol) {
      throw Error(ErrorCode::NotPositiveDefinite, "covariance has a negative pivot " + std::to_string(d(i)));
    }
    d(i) = std::sqrt(std::max(d(i), 0.0));
  }
  // a = P^T L D L^T P
  Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd root = l * d.asDiagonal();
  return ldlt.transpositionsP().transpose() * root;
}

}  // namespace wgp
