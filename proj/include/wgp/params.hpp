#pragma once

#include "wgp/kernels.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace wgp {

// Model architecture. `name()` follows the "FAM-lS-lT" convention, e.g. "M12-2-1".
struct ModelConfig {
  KernelFamily spatial_family = KernelFamily::SE;
  KernelFamily temporal_family = KernelFamily::M32;
  int spatial_layers = 0;   // 0..3
  int temporal_layers = 0;  // 0..1
  bool periodic = true;     // train (eta_p, rho_p, p); when false eta_p is fixed at 0

  std::string name() const;
  void validate() const;
  static ModelConfig from_name(std::string_view name);

  int kernel_param_count() const;  // includes the nugget
  int spatial_warp_param_count() const { return 5 * spatial_layers; }
  int temporal_warp_param_count() const { return 3 * temporal_layers; }
  int param_count() const;
  int warp_weight_count() const { return 2 * spatial_layers + temporal_layers; }
};

struct ParameterVector {
  KernelSpec kernel;
  double sigma2 = 0.1;

  void validate() const;
};

enum class ParamKind { Positive, Weight, Center };

struct ParamInfo {
  std::string name;
  ParamKind kind;
};

// Layout of the trainable vector: kernel parameters, then spatial warp layers
// (w1, w2, gamma1, gamma2, a), then temporal warp layers (w, gamma, a), then sigma2.
std::vector<ParamInfo> parameter_layout(const ModelConfig& config);

Eigen::VectorXd to_unconstrained(const ParameterVector& theta, const ModelConfig& config);
ParameterVector from_unconstrained(const Eigen::VectorXd& u, const ModelConfig& config);

// Scalar maps used by the vector transforms.
double weight_to_unconstrained(double w);
double weight_from_unconstrained(double u);
double center_to_unconstrained(double c);
double center_from_unconstrained(double u);

}  // namespace wgp
