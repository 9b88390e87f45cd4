#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace wgp {

// Open interval of admissible RBF weights; inside it each unit is injective.
inline constexpr double kWarpWeightLower = -1.0;
inline const double kWarpWeightUpper = 0.5 * std::exp(1.5);

// One radial-basis warping unit:
//   x_d <- x_d + w_d (x_d - gamma_d) exp(-|x - gamma|^2 / (2 a^2))
struct RbfLayer {
  Eigen::VectorXd weights;
  Eigen::VectorXd center;
  double scale = 0.25;

  int dim() const { return static_cast<int>(weights.size()); }
  // Throws ConstraintViolation when any invariant is broken.
  void validate() const;
};

// Ordered composition g_l o ... o g_1; layers[0] is applied first.
struct WarpStack {
  int dim = 2;
  std::vector<RbfLayer> layers;

  bool empty() const { return layers.empty(); }
  void validate() const;
};

Eigen::VectorXd apply_layer(const RbfLayer& layer, const Eigen::Ref<const Eigen::VectorXd>& x);

Eigen::VectorXd warp_point(const WarpStack& stack, const Eigen::Ref<const Eigen::VectorXd>& x);

// Row-wise warp of an n x D matrix.
Eigen::MatrixXd warp_batch(const WarpStack& stack, const Eigen::Ref<const Eigen::MatrixXd>& points);

struct InjectivityProbe {
  bool injective = true;
  double min_jacobian_det = 1.0;
};

// Central-difference Jacobian determinants on a uniform grid over [0,1]^D.
// Weight bounds are not enforced here, so constraint-breaking layers can be probed.
InjectivityProbe probe_injectivity(const WarpStack& stack, int grid_resolution);

}  // namespace wgp
