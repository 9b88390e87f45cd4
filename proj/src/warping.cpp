#include "wgp/warping.hpp"

#include "wgp/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wgp {

void RbfLayer::validate() const {
  if (weights.size() != center.size() || weights.size() < 1) {
    throw Error(ErrorCode::ConstraintViolation, "warp layer weights and center differ in dimension");
  }
  for (Eigen::Index d = 0; d < weights.size(); ++d) {
    const double w = weights(d);
    if (!(w > kWarpWeightLower && w < kWarpWeightUpper)) {
      throw Error(ErrorCode::ConstraintViolation, "warp weight " + std::to_string(w) + " outside (-1, e^1.5/2)");
    }
    if (!(center(d) >= 0.0 && center(d) <= 1.0)) {
      throw Error(ErrorCode::ConstraintViolation, "warp center " + std::to_string(center(d)) + " outside [0,1]");
    }
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::ConstraintViolation, "warp scale must be positive");
  }
}

void WarpStack::validate() const {
  if (dim != 1 && dim != 2) throw Error(ErrorCode::ConstraintViolation, "warp dimension must be 1 or 2");
  for (const auto& layer : layers) {
    if (layer.dim() != dim) throw Error(ErrorCode::ConstraintViolation, "warp layer dimension mismatch");
    layer.validate();
  }
}

Eigen::VectorXd apply_layer(const RbfLayer& layer, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXd offset = x - layer.center;
  const double bump = std::exp(-offset.squaredNorm() / (2.0 * layer.scale * layer.scale));
  return x + (layer.weights.array() * offset.array() * bump).matrix();
}

Eigen::VectorXd warp_point(const WarpStack& stack, const Eigen::Ref<const Eigen::VectorXd>& x) {
  stack.validate();
  if (x.size() != stack.dim) throw Error(ErrorCode::ConstraintViolation, "point dimension does not match warp");
  Eigen::VectorXd out = x;
  for (const auto& layer : stack.layers) out = apply_layer(layer, out);
  return out;
}

Eigen::MatrixXd warp_batch(const WarpStack& stack, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  stack.validate();
  if (points.rows() > 0 && points.cols() != stack.dim) {
    throw Error(ErrorCode::ConstraintViolation, "point dimension does not match warp");
  }
  Eigen::MatrixXd out = points;
  if (stack.empty()) return out;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::VectorXd p = out.row(i).transpose();
    for (const auto& layer : stack.layers) p = apply_layer(layer, p);
    out.row(i) = p.transpose();
  }
  return out;
}

InjectivityProbe probe_injectivity(const WarpStack& stack, int grid_resolution) {
  if (grid_resolution < 2) throw Error(ErrorCode::InvalidRange, "grid resolution must be at least 2");
  // Only the shape is checked: the probe is also meant for layers outside the weight bounds.
  if (stack.dim != 1 && stack.dim != 2) throw Error(ErrorCode::ConstraintViolation, "warp dimension must be 1 or 2");
  for (const auto& layer : stack.layers) {
    if (layer.dim() != stack.dim || layer.center.size() != stack.dim || !(layer.scale > 0.0))
      throw Error(ErrorCode::ConstraintViolation, "malformed warp layer");
  }
  auto warp = [&](Eigen::VectorXd x) {
    for (const auto& layer : stack.layers) x = apply_layer(layer, x);
    return x;
  };
  InjectivityProbe probe;
  if (stack.empty()) return probe;

  constexpr double h = 1e-6;
  const int D = stack.dim;
  probe.min_jacobian_det = std::numeric_limits<double>::infinity();
  auto det_at = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J(D, D);
    for (int c = 0; c < D; ++c) {
      Eigen::VectorXd hi = x, lo = x;
      hi(c) += h;
      lo(c) -= h;
      J.col(c) = (warp(hi) - warp(lo)) / (2.0 * h);
    }
    return J.determinant();
  };
  const double step = 1.0 / (grid_resolution - 1);
  if (D == 1) {
    for (int i = 0; i < grid_resolution; ++i) {
      const double det = det_at(Eigen::VectorXd::Constant(1, i * step));
      probe.min_jacobian_det = std::min(probe.min_jacobian_det, det);
    }
  } else {
    for (int i = 0; i < grid_resolution; ++i) {
      for (int j = 0; j < grid_resolution; ++j) {
        const double det = det_at(Eigen::Vector2d(i * step, j * step));
        probe.min_jacobian_det = std::min(probe.min_jacobian_det, det);
      }
    }
  }
  probe.injective = probe.min_jacobian_det > 0.0;
  return probe;
}

}  // namespace wgp
