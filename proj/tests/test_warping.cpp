#include <doctest.h>

#include "helpers.hpp"

#include "wgp/error.hpp"
#include "wgp/warping.hpp"

using namespace wgp;

namespace {

RbfLayer layer(std::initializer_list<double> w, std::initializer_list<double> g, double a) {
  RbfLayer l;
  l.weights = Eigen::Map<const Eigen::VectorXd>(w.begin(), static_cast<Eigen::Index>(w.size()));
  l.center = Eigen::Map<const Eigen::VectorXd>(g.begin(), static_cast<Eigen::Index>(g.size()));
  l.scale = a;
  return l;
}

}  // namespace

TEST_CASE("warp_point: center is a fixed point") {
  WarpStack s{2, {layer({1.3, -0.6}, {0.4, 0.7}, 0.2)}};
  const auto y = warp_point(s, Eigen::Vector2d(0.4, 0.7));
  CHECK(y(0) == 0.4);
  CHECK(y(1) == 0.7);
}

TEST_CASE("warp_point: zero weights are the identity") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  WarpStack s{2, {layer({0.0, 0.0}, {0.3, 0.3}, 0.1), layer({0.0, 0.0}, {0.8, 0.1}, 0.4)}};
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x(u(rng), u(rng));
    CHECK((warp_point(s, x) - x).norm() <= 1e-15);
  }
}

TEST_CASE("warp_point: hand-evaluated layer") {
  WarpStack s{2, {layer({1.0, 0.2}, {0.5, 0.5}, 0.25)}};
  const auto y = warp_point(s, Eigen::Vector2d(0.75, 0.5));
  CHECK(y(0) == doctest::Approx(0.75 + 0.25 * std::exp(-0.5)).epsilon(1e-14));
  CHECK(y(0) == doctest::Approx(0.90163).epsilon(1e-5));
  CHECK(y(1) == 0.5);
}

TEST_CASE("warp_point: layers compose in order and match the oracle") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    WarpStack s{2, {testing::random_layer(rng, 2), testing::random_layer(rng, 2), testing::random_layer(rng, 2)}};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::Vector2d x(u(rng), u(rng));
    const auto want = oracle::warp(testing::layers_of(s), {x(0), x(1)});
    const auto got = warp_point(s, x);
    CHECK(got(0) == doctest::Approx(want[0]).epsilon(1e-14));
    CHECK(got(1) == doctest::Approx(want[1]).epsilon(1e-14));
  }
  WarpStack ab{2, {layer({1.2, 1.0}, {0.4, 0.6}, 0.18), layer({-0.7, 1.5}, {0.2, 0.8}, 0.25)}};
  WarpStack ba{2, {ab.layers[1], ab.layers[0]}};
  CHECK((warp_point(ab, Eigen::Vector2d(0.3, 0.7)) - warp_point(ba, Eigen::Vector2d(0.3, 0.7))).norm() > 1e-3);
}

TEST_CASE("warp_point: displacement vanishes far from the center") {
  WarpStack s{2, {layer({1.5, -0.9}, {0.5, 0.5}, 0.05)}};
  for (double r : {0.5, 0.7, 1.0}) {
    const Eigen::Vector2d x(0.5 + r * 0.6, 0.5 + r * 0.8);
    CHECK((warp_point(s, x) - x).norm() < 1e-12);
  }
}

TEST_CASE("warp_point: sign of the weight sets expansion or contraction") {
  for (double w : {0.8, -0.6}) {
    WarpStack s{1, {layer({w}, {0.5}, 0.2)}};
    for (double x : {0.3, 0.45, 0.55, 0.7}) {
      const double y = warp_point(s, Eigen::VectorXd::Constant(1, x))(0);
      const double before = std::abs(x - 0.5);
      const double after = std::abs(y - 0.5);
      if (w > 0) CHECK(after > before);
      else CHECK(after < before);
    }
  }
}

TEST_CASE("warp_point: constraint violations") {
  auto bad = [](RbfLayer l) {
    WarpStack s{2, {std::move(l)}};
    try {
      warp_point(s, Eigen::Vector2d(0.5, 0.5));
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConstraintViolation;
    }
    return false;
  };
  CHECK(bad(layer({-1.0, 0.0}, {0.5, 0.5}, 0.2)));
  CHECK(bad(layer({kWarpWeightUpper, 0.0}, {0.5, 0.5}, 0.2)));
  CHECK(bad(layer({0.1, 0.0}, {0.5, 1.2}, 0.2)));
  CHECK(bad(layer({0.1, 0.0}, {0.5, 0.5}, 0.0)));
  CHECK(bad(layer({0.1}, {0.5}, 0.2)));
}

TEST_CASE("warp_batch") {
  std::mt19937_64 rng(3);
  WarpStack s{2, {testing::random_layer(rng, 2), testing::random_layer(rng, 2)}};
  CHECK(warp_batch(s, Eigen::MatrixXd(0, 2)).rows() == 0);
  Eigen::MatrixXd same(3, 2);
  same.rowwise() = Eigen::RowVector2d(0.2, 0.9);
  const auto ys = warp_batch(s, same);
  CHECK(ys.row(0) == ys.row(2));
  const Eigen::MatrixXd x = (Eigen::MatrixXd::Random(25, 2).array() + 1.0) / 2.0;
  const auto y = warp_batch(s, x);
  for (int i = 0; i < 25; ++i) CHECK((y.row(i).transpose() - warp_point(s, x.row(i).transpose())).norm() == 0.0);
}

TEST_CASE("probe_injectivity") {
  const auto id = probe_injectivity(WarpStack{2, {}}, 10);
  CHECK(id.injective);
  CHECK(id.min_jacobian_det == doctest::Approx(1.0));
  CHECK(probe_injectivity(WarpStack{2, {layer({1.5, -0.9}, {0.4, 0.6}, 0.25)}}, 50).injective);

  // Weight -1.5 folds the line over near the center.
  RbfLayer fold = layer({-1.5}, {0.5}, 0.25);
  WarpStack folded{1, {fold}};
  const auto probe = probe_injectivity(folded, 100);
  CHECK_FALSE(probe.injective);
  CHECK(probe.min_jacobian_det < 0.0);
}

TEST_CASE("probe_injectivity: random valid layers") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> w(-0.999, kWarpWeightUpper - 1e-3), c(0.0, 1.0), a(0.05, 0.6);
  for (int rep = 0; rep < 40; ++rep) {
    RbfLayer l;
    l.weights = Eigen::Vector2d(w(rng), w(rng));
    l.center = Eigen::Vector2d(c(rng), c(rng));
    l.scale = a(rng);
    CHECK(probe_injectivity(WarpStack{2, {l}}, 100).injective);
    RbfLayer t;
    t.weights = Eigen::VectorXd::Constant(1, w(rng));
    t.center = Eigen::VectorXd::Constant(1, c(rng));
    t.scale = a(rng);
    CHECK(probe_injectivity(WarpStack{1, {t}}, 100).injective);
  }
}
