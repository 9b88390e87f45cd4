#include <doctest.h>

#include "helpers.hpp"

#include "wgp/error.hpp"
#include "wgp/fit.hpp"
#include "wgp/likelihood.hpp"
#include "wgp/params.hpp"

#include <numbers>
#include <set>

using namespace wgp;

namespace {

InputGrid unit_grid() {
  InputGrid g;
  g.spatial = Eigen::MatrixX2d::Constant(1, 2, 0.5);
  g.temporal = Eigen::VectorXd::Constant(1, 0.5);
  return g;
}

}  // namespace

TEST_CASE("log_likelihood: scalar Gaussian at its mean") {
  ParameterVector th;
  th.kernel.eta = 0.4;
  th.kernel.eta_p = 0.25;
  th.sigma2 = 0.2;
  const double c = 0.4 * 1.25 + 0.2;
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 1);
  CHECK(log_likelihood(th, unit_grid(), y) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(c)).epsilon(1e-14));
}

TEST_CASE("log_likelihood: matches the brute-force MVN sum") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    ModelConfig cfg;
    cfg.spatial_family = testing::random_family(rng);
    cfg.temporal_family = testing::random_family(rng);
    cfg.spatial_layers = rep % 4;
    cfg.temporal_layers = rep % 2;
    cfg.periodic = rep % 3 != 0;
    const int M = 2 + rep % 3, T = 2 + rep % 4;
    const auto th = testing::random_theta(rng, cfg);
    const auto g = testing::random_grid(rng, M, T);
    const auto y = testing::random_days(rng, M * T, 3);
    Eigen::MatrixXd cov = testing::covariance(g, th.kernel);
    cov.diagonal().array() += th.sigma2;
    CHECK(log_likelihood(th, g, y) == doctest::Approx(oracle::mvn_logpdf_sum(cov, y)).epsilon(1e-8));
  }
}

TEST_CASE("log_likelihood: duplicated days double the quadratic term") {
  std::mt19937_64 rng(12);
  ModelConfig cfg;
  const auto th = testing::random_theta(rng, cfg);
  const auto g = testing::random_grid(rng, 3, 4);
  const auto y = testing::random_days(rng, 12, 2);
  Eigen::MatrixXd yy(12, 4);
  yy << y, y;
  Eigen::MatrixXd cov = testing::covariance(g, th.kernel);
  cov.diagonal().array() += th.sigma2;
  const double logdet = std::log(cov.determinant());
  auto quad = [&](const Eigen::MatrixXd& d) {
    const double n = static_cast<double>(d.cols());
    return log_likelihood(th, g, d) + n * 12 / 2.0 * std::log(2.0 * std::numbers::pi) + n / 2.0 * logdet;
  };
  CHECK(quad(yy) == doctest::Approx(2.0 * quad(y)).epsilon(1e-9));
}

TEST_CASE("reparameterization") {
  ModelConfig plain;
  plain.periodic = false;
  ParameterVector one;
  one.kernel.eta = 1.0;
  CHECK(to_unconstrained(one, plain)(0) == 0.0);
  CHECK(from_unconstrained(to_unconstrained(one, plain), plain).kernel.eta == 1.0);
  const double mid = 0.5 * (kWarpWeightLower + kWarpWeightUpper);
  CHECK(std::abs(weight_to_unconstrained(mid)) < 1e-12);
  CHECK(std::abs(center_to_unconstrained(0.5)) < 1e-12);
  CHECK_THROWS_AS(weight_to_unconstrained(-1.0), Error);
  CHECK_THROWS_AS(weight_to_unconstrained(kWarpWeightUpper), Error);

  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    ModelConfig cfg;
    cfg.spatial_layers = rep % 4;
    cfg.temporal_layers = rep % 2;
    cfg.periodic = rep % 2 == 0;
    const auto th = testing::random_theta(rng, cfg);
    const auto u = to_unconstrained(th, cfg);
    CHECK(u.size() == cfg.param_count());
    const auto back = from_unconstrained(u, cfg);
    CHECK(std::abs(back.kernel.eta - th.kernel.eta) <= 1e-10 * th.kernel.eta);
    CHECK(std::abs(back.kernel.rho_s - th.kernel.rho_s) <= 1e-10);
    CHECK(std::abs(back.kernel.rho_t - th.kernel.rho_t) <= 1e-10);
    CHECK(std::abs(back.sigma2 - th.sigma2) <= 1e-10);
    if (cfg.periodic) {
      CHECK(std::abs(back.kernel.eta_p - th.kernel.eta_p) <= 1e-10);
      CHECK(std::abs(back.kernel.rho_p - th.kernel.rho_p) <= 1e-10);
      CHECK(std::abs(back.kernel.period - th.kernel.period) <= 1e-10);
    }
    for (std::size_t l = 0; l < th.kernel.spatial_warp.layers.size(); ++l) {
      const auto& a = th.kernel.spatial_warp.layers[l];
      const auto& b = back.kernel.spatial_warp.layers[l];
      CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((a.center - b.center).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(a.scale - b.scale) <= 1e-10);
    }
    for (std::size_t l = 0; l < th.kernel.temporal_warp.layers.size(); ++l) {
      const auto& a = th.kernel.temporal_warp.layers[l];
      const auto& b = back.kernel.temporal_warp.layers[l];
      CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((a.center - b.center).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("parameter layout and model names") {
  const auto c = ModelConfig::from_name("SE-0-0");
  CHECK(c.param_count() == 7);
  const auto d = ModelConfig::from_name("M12-2-1");
  CHECK(d.spatial_family == KernelFamily::M12);
  CHECK(d.param_count() == 7 + 10 + 3);
  CHECK(d.name() == "M12-2-1");
  CHECK(parameter_layout(d).size() == 20);
  CHECK_THROWS_AS(ModelConfig::from_name("SE-4-0"), Error);
  CHECK_THROWS_AS(ModelConfig::from_name("SE-0-2"), Error);
  CHECK_THROWS_AS(ModelConfig::from_name("SE0"), Error);
}

TEST_CASE("gradient: hybrid agrees with finite differences of l") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 6; ++rep) {
    ModelConfig cfg;
    cfg.spatial_family = testing::random_family(rng);
    cfg.temporal_family = testing::random_family(rng);
    cfg.spatial_layers = rep % 3;
    cfg.temporal_layers = rep % 2;
    cfg.periodic = rep % 2 == 0;
    const auto th = testing::random_theta(rng, cfg);
    const auto g = testing::random_grid(rng, 4, 6);
    const auto y = testing::random_days(rng, 24, 2);
    const auto u = to_unconstrained(th, cfg);
    for (auto backend : {Backend::Dense, Backend::Kronecker}) {
      const auto h = evaluate(u, cfg, g, y, GradientMode::Hybrid, 1e-5, backend);
      const auto f = evaluate(u, cfg, g, y, GradientMode::FullFd, 1e-5, Backend::Dense);
      CHECK(h.value == doctest::Approx(f.value).epsilon(1e-10));
      const double scale = f.gradient.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < u.size(); ++j)
        CHECK(std::abs(h.gradient(j) - f.gradient(j)) <= 1e-4 * std::max(std::abs(f.gradient(j)), 1e-3 * scale));
    }
  }
}

TEST_CASE("gradient: flat direction of a zero-weight layer's center") {
  std::mt19937_64 rng(15);
  ModelConfig cfg;
  cfg.spatial_layers = 1;
  auto th = testing::random_theta(rng, cfg);
  th.kernel.spatial_warp.layers[0].weights.setZero();
  const auto g = testing::random_grid(rng, 4, 6);
  const auto y = testing::random_days(rng, 24, 2);
  const auto u = to_unconstrained(th, cfg);
  const auto e = evaluate(u, cfg, g, y);
  const auto layout = parameter_layout(cfg);
  for (std::size_t j = 0; j < layout.size(); ++j)
    if (layout[j].kind == ParamKind::Center || layout[j].name == "spatial_warp[0].a")
      CHECK(std::abs(e.gradient(static_cast<Eigen::Index>(j))) < 1e-6);
}

TEST_CASE("sign patterns and initial values") {
  CHECK(sign_patterns(0, 16, 1).size() == 1);
  const auto p3 = sign_patterns(3, 16, 1);
  CHECK(p3.size() == 8);
  std::set<std::vector<int>> unique(p3.begin(), p3.end());
  CHECK(unique.size() == 8);
  const auto p7 = sign_patterns(7, 16, 5);
  CHECK(p7.size() == 16);
  CHECK(std::set<std::vector<int>>(p7.begin(), p7.end()).size() == 16);
  CHECK(sign_patterns(7, 16, 5) == p7);

  ModelConfig cfg;
  cfg.spatial_layers = 1;
  cfg.temporal_layers = 1;
  const Eigen::MatrixXd days = Eigen::MatrixXd::Constant(4, 3, 1.0) + Eigen::MatrixXd::Identity(4, 3);
  const auto th = initial_parameters(cfg, days, {-1, 1, 1});
  CHECK(th.kernel.spatial_warp.layers[0].weights(0) == -0.5);
  CHECK(th.kernel.spatial_warp.layers[0].weights(1) == doctest::Approx(1.12042).epsilon(1e-5));
  CHECK(th.kernel.temporal_warp.layers[0].weights(0) == doctest::Approx(std::exp(1.5) / 4.0));
  CHECK(th.kernel.spatial_warp.layers[0].scale == 0.25);
  CHECK(th.kernel.rho_s == 0.2);
  CHECK(th.kernel.eta_p == 0.1);
  CHECK(th.kernel.period == 0.5);
  const double mean = days.mean();
  const double var = (days.array() - mean).square().sum() / 11.0;
  CHECK(th.kernel.eta == doctest::Approx(var));
  CHECK(th.sigma2 == doctest::Approx(0.1 * var));
}

TEST_CASE("modified BIC") {
  ModelConfig cfg;
  cfg.spatial_layers = 1;
  cfg.temporal_layers = 1;
  cfg.periodic = false;
  CHECK(cfg.kernel_param_count() == 4);
  CHECK(modified_bic(-1000.0, cfg, 25, 24) == doctest::Approx(1025.61).epsilon(1e-5));
  ModelConfig plain;
  plain.periodic = false;
  CHECK(modified_bic(-50.0, plain, 25, 24) == doctest::Approx(50.0 + 4.0 * std::log(600.0) / 2.0));
  ModelConfig other = plain;
  other.spatial_family = KernelFamily::M12;
  CHECK(modified_bic(-50.0, plain, 25, 24) - modified_bic(-60.0, other, 25, 24) == doctest::Approx(-10.0));
}

TEST_CASE("fit: restart dominance, stored loss and determinism") {
  std::mt19937_64 rng(16);
  ModelConfig truth_cfg;
  truth_cfg.periodic = false;
  auto truth = testing::random_theta(rng, truth_cfg);
  truth.kernel.eta = 0.5;
  truth.sigma2 = 0.05;
  const auto g = testing::random_grid(rng, 4, 6);
  Eigen::MatrixXd cov = testing::covariance(g, truth.kernel);
  cov.diagonal().array() += truth.sigma2;
  const Eigen::MatrixXd L = cov.llt().matrixL();
  const Eigen::MatrixXd y = L * testing::random_days(rng, 24, 20, 1.0);

  ModelConfig cfg = ModelConfig::from_name("SE-1-0");
  cfg.periodic = false;
  OptimizerConfig opt;
  opt.max_iters = 150;
  opt.warmup_iters = 30;
  const auto m = fit(g, y, cfg, opt, 7);
  REQUIRE(m.restarts.size() == 4);
  for (const auto& r : m.restarts) {
    CHECK_FALSE(r.failed);
    CHECK(m.log_likelihood >= r.final_log_likelihood - 1e-9);
  }
  CHECK(m.training_loss == doctest::Approx(-log_likelihood(m.theta, g, y)).epsilon(1e-12));
  CHECK(std::abs(m.training_loss + m.log_likelihood) < 1e-6);
  CHECK(m.bic == doctest::Approx(modified_bic(m.log_likelihood, cfg, 4, 6)));
  CHECK(m.log_likelihood > m.restarts[0].initial_log_likelihood);

  opt.threads = 3;
  const auto again = fit(g, y, cfg, opt, 7);
  CHECK(again.log_likelihood == m.log_likelihood);
  CHECK(again.loss_trace == m.loss_trace);
}

TEST_CASE("fit: gradient is small at the optimum of an unwarped model") {
  std::mt19937_64 rng(17);
  ModelConfig cfg;
  cfg.periodic = false;
  auto truth = testing::random_theta(rng, cfg);
  truth.kernel.eta = 0.5;
  truth.kernel.rho_s = 0.4;
  truth.kernel.rho_t = 0.3;
  truth.sigma2 = 0.1;
  const auto g = testing::random_grid(rng, 4, 6);
  Eigen::MatrixXd cov = testing::covariance(g, truth.kernel);
  cov.diagonal().array() += truth.sigma2;
  const Eigen::MatrixXd L = cov.llt().matrixL();
  const Eigen::MatrixXd y = L * testing::random_days(rng, 24, 40, 1.0);
  OptimizerConfig opt;
  opt.learning_rate = 0.02;
  opt.max_iters = 3000;
  const auto m = fit(g, y, cfg, opt, 1);
  const auto e = evaluate(to_unconstrained(m.theta, cfg), cfg, g, y);
  CHECK(e.gradient.norm() < 0.05 * std::sqrt(static_cast<double>(y.cols())));
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig opt;
  opt.learning_rate = 0.0;
  CHECK_THROWS_AS(opt.validate(), Error);
  opt = {};
  opt.max_iters = 0;
  CHECK_THROWS_AS(opt.validate(), Error);
}
