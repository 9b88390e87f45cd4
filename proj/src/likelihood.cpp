#include "wgp/likelihood.hpp"

#include "wgp/error.hpp"
#include "wgp/kernels.hpp"
#include "wgp/linalg.hpp"

#include <cmath>
#include <numbers>

namespace wgp {

namespace {

struct Factors {
  double eta;
  double sigma2;
  Eigen::MatrixXd ks;
  Eigen::MatrixXd kt;
};

Factors make_factors(const ParameterVector& theta, const InputGrid& grid) {
  return Factors{theta.kernel.eta, theta.sigma2, spatial_factor(grid.spatial, theta.kernel),
                 temporal_factor(grid.temporal, theta.kernel)};
}

Eigen::MatrixXd assemble(const Factors& f) {
  const auto M = f.ks.rows();
  const auto T = f.kt.rows();
  Eigen::MatrixXd K(M * T, M * T);
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = 0; b < M; ++b) K.block(a * T, b * T, T, T) = (f.eta * f.ks(a, b)) * f.kt;
  K.diagonal().array() += f.sigma2;
  return K;
}

double value_from(const CholeskyFactor& chol, const Eigen::MatrixXd& days) {
  const double n_days = static_cast<double>(days.cols());
  const double dim = static_cast<double>(days.rows());
  const Eigen::MatrixXd z = chol.llt.matrixL().solve(days);
  return -0.5 * n_days * dim * std::log(2.0 * std::numbers::pi) - 0.5 * n_days * chol.log_det() -
         0.5 * z.squaredNorm();
}

void check_shapes(const InputGrid& grid, const Eigen::MatrixXd& days) {
  if (days.cols() < 1) throw Error(ErrorCode::EmptyTrainingSlice, "no training days");
  if (days.rows() != static_cast<Eigen::Index>(grid.num_sites()) * grid.num_hours())
    throw Error(ErrorCode::InvalidRange, "day vectors do not match the input grid");
}

}  // namespace

double log_likelihood(const ParameterVector& theta, const InputGrid& grid, const Eigen::MatrixXd& days) {
  theta.validate();
  check_shapes(grid, days);
  const auto chol = factorize(assemble(make_factors(theta, grid)));
  return value_from(chol, days);
}

double log_likelihood(const ParameterVector& theta, const ErrorPanel& panel) {
  return log_likelihood(theta, panel.grid, panel.training_matrix());
}

namespace {

// Eigendecomposed Kronecker form of K + sigma2 I:
//   (Q_S kron Q_T) diag(eta lambda_a mu_t + sigma2) (Q_S kron Q_T)^T.
// Day vectors are viewed as T x M matrices Z (column m holds site m's hours),
// on which (A kron B) vec acts as B Z A^T.
struct SpectralFactor {
  Eigen::MatrixXd qs, qt;
  Eigen::VectorXd lambda, mu;
  Eigen::MatrixXd d;  // T x M
  double eta;

  SpectralFactor(const Factors& f) : eta(f.eta) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.ks), et(f.kt);
    if (es.info() != Eigen::Success || et.info() != Eigen::Success)
      throw Error(ErrorCode::NotPositiveDefinite, "eigendecomposition of a kernel factor failed");
    qs = es.eigenvectors();
    qt = et.eigenvectors();
    lambda = es.eigenvalues();
    mu = et.eigenvalues();
    d = (f.eta * mu * lambda.transpose()).array() + f.sigma2;
    if (!(d.minCoeff() > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite, "Kronecker covariance has a nonpositive eigenvalue");
  }

  double log_det() const { return d.array().log().sum(); }

  Eigen::Map<const Eigen::MatrixXd> as_matrix(const Eigen::MatrixXd& days, Eigen::Index n) const {
    return Eigen::Map<const Eigen::MatrixXd>(days.col(n).data(), qt.rows(), qs.rows());
  }
};

double spectral_value(const SpectralFactor& sf, const Eigen::MatrixXd& days) {
  const double n_days = static_cast<double>(days.cols());
  const double dim = static_cast<double>(days.rows());
  double quad = 0.0;
  for (Eigen::Index n = 0; n < days.cols(); ++n) {
    const Eigen::MatrixXd rotated = sf.qt.transpose() * sf.as_matrix(days, n) * sf.qs;
    quad += (rotated.array().square() / sf.d.array()).sum();
  }
  return -0.5 * n_days * dim * std::log(2.0 * std::numbers::pi) - 0.5 * n_days * sf.log_det() - 0.5 * quad;
}

double dense_value(const Factors& f, const Eigen::MatrixXd& days) { return value_from(factorize(assemble(f)), days); }

double backend_value(const Factors& f, const Eigen::MatrixXd& days, Backend backend) {
  return backend == Backend::Dense ? dense_value(f, days) : spectral_value(SpectralFactor(f), days);
}

// Weights such that dl = 1/2 (d_eta * eta_weight + eta (<dK_S, spatial> + <dK_T, temporal>) + d_sigma2 * nugget).
struct GradientWeights {
  Eigen::MatrixXd spatial;
  Eigen::MatrixXd temporal;
  double eta_weight = 0.0;
  double nugget_weight = 0.0;
};

GradientWeights dense_weights(const Factors& base, const CholeskyFactor& chol, const Eigen::MatrixXd& days) {
  const auto M = base.ks.rows();
  const auto T = base.kt.rows();
  const auto n = M * T;
  const double n_days = static_cast<double>(days.cols());
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(n, n);
  chol.llt.solveInPlace(W);  // K^-1
  const Eigen::MatrixXd alpha = chol.llt.solve(days);
  W *= -n_days;
  W.selfadjointView<Eigen::Lower>().rankUpdate(alpha);
  W.triangularView<Eigen::StrictlyUpper>() = W.transpose();

  // W = A A^T - N K^-1 contracted against each Kronecker factor.
  GradientWeights gw;
  gw.spatial.resize(M, M);
  gw.temporal = Eigen::MatrixXd::Zero(T, T);
  for (Eigen::Index a = 0; a < M; ++a) {
    for (Eigen::Index b = 0; b < M; ++b) {
      const auto block = W.block(a * T, b * T, T, T);
      gw.spatial(a, b) = block.cwiseProduct(base.kt).sum();
      gw.temporal += base.ks(a, b) * block;
    }
  }
  gw.eta_weight = gw.spatial.cwiseProduct(base.ks).sum();
  gw.nugget_weight = W.trace();
  return gw;
}

GradientWeights spectral_weights(const Factors& base, const SpectralFactor& sf, const Eigen::MatrixXd& days) {
  const auto M = base.ks.rows();
  const auto T = base.kt.rows();
  const double n_days = static_cast<double>(days.cols());
  Eigen::MatrixXd s_kt = Eigen::MatrixXd::Zero(M, M);  // sum_n alpha_n^T K_T alpha_n
  Eigen::MatrixXd s_ks = Eigen::MatrixXd::Zero(T, T);  // sum_n alpha_n K_S alpha_n^T
  double alpha_sq = 0.0;
  for (Eigen::Index n = 0; n < days.cols(); ++n) {
    const Eigen::MatrixXd rotated = sf.qt.transpose() * sf.as_matrix(days, n) * sf.qs;
    const Eigen::MatrixXd alpha = sf.qt * (rotated.array() / sf.d.array()).matrix() * sf.qs.transpose();
    s_kt.noalias() += alpha.transpose() * base.kt * alpha;
    s_ks.noalias() += alpha * base.ks * alpha.transpose();
    alpha_sq += alpha.squaredNorm();
  }
  const Eigen::ArrayXXd inv_d = sf.d.array().inverse();
  // diag of K^-1 traced against one factor in the other factor's eigenbasis
  const Eigen::VectorXd r_s = (inv_d.colwise() * sf.mu.array()).colwise().sum().transpose();
  const Eigen::VectorXd r_t = (inv_d.rowwise() * sf.lambda.transpose().array()).rowwise().sum();

  GradientWeights gw;
  gw.spatial = s_kt - n_days * sf.qs * r_s.asDiagonal() * sf.qs.transpose();
  gw.temporal = s_ks - n_days * sf.qt * r_t.asDiagonal() * sf.qt.transpose();
  gw.eta_weight = s_kt.cwiseProduct(base.ks).sum() -
                  n_days * ((sf.mu * sf.lambda.transpose()).array() * inv_d).sum();
  gw.nugget_weight = alpha_sq - n_days * inv_d.sum();
  return gw;
}

}  // namespace

LikelihoodEval evaluate(const Eigen::VectorXd& u, const ModelConfig& config, const InputGrid& grid,
                        const Eigen::MatrixXd& days, GradientMode mode, double fd_step, Backend backend) {
  check_shapes(grid, days);
  const auto base = make_factors(from_unconstrained(u, config), grid);

  LikelihoodEval out;
  out.gradient = Eigen::VectorXd::Zero(u.size());

  if (mode == GradientMode::FullFd) {
    out.value = backend_value(base, days, backend);
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      Eigen::VectorXd up = u, down = u;
      up(j) += fd_step;
      down(j) -= fd_step;
      const double l_up = backend_value(make_factors(from_unconstrained(up, config), grid), days, backend);
      const double l_down = backend_value(make_factors(from_unconstrained(down, config), grid), days, backend);
      out.gradient(j) = (l_up - l_down) / (2.0 * fd_step);
    }
    return out;
  }

  GradientWeights gw;
  if (backend == Backend::Dense) {
    const auto chol = factorize(assemble(base));
    out.value = value_from(chol, days);
    gw = dense_weights(base, chol, days);
  } else {
    const SpectralFactor sf(base);
    out.value = spectral_value(sf, days);
    gw = spectral_weights(base, sf, days);
  }

  for (Eigen::Index j = 0; j < u.size(); ++j) {
    Eigen::VectorXd up = u, down = u;
    up(j) += fd_step;
    down(j) -= fd_step;
    const auto f_up = make_factors(from_unconstrained(up, config), grid);
    const auto f_down = make_factors(from_unconstrained(down, config), grid);
    const double inv = 1.0 / (2.0 * fd_step);
    const double d_eta = (f_up.eta - f_down.eta) * inv;
    const double d_sigma2 = (f_up.sigma2 - f_down.sigma2) * inv;
    const double d_ks = ((f_up.ks - f_down.ks) * inv).cwiseProduct(gw.spatial).sum();
    const double d_kt = ((f_up.kt - f_down.kt) * inv).cwiseProduct(gw.temporal).sum();
    out.gradient(j) = 0.5 * (d_eta * gw.eta_weight + base.eta * (d_ks + d_kt) + d_sigma2 * gw.nugget_weight);
  }
  return out;
}

Eigen::VectorXd gradient(const ParameterVector& theta, const ModelConfig& config, const ErrorPanel& panel,
                         GradientMode mode) {
  return evaluate(to_unconstrained(theta, config), config, panel.grid, panel.training_matrix(), mode).gradient;
}

}  // namespace wgp
