#include "wgp/params.hpp"

#include "wgp/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace wgp {

namespace {

double logistic(double u) {
  u = std::clamp(u, -30.0, 30.0);
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

double positive_to_unconstrained(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorCode::ConstraintViolation, name + " must be positive, got " + std::to_string(v));
  return std::log(v);
}

}  // namespace

std::string ModelConfig::name() const {
  return std::string(to_string(spatial_family)) + "-" + std::to_string(spatial_layers) + "-" +
         std::to_string(temporal_layers);
}

void ModelConfig::validate() const {
  if (spatial_layers < 0 || spatial_layers > 3)
    throw Error(ErrorCode::InvalidConfig, "spatial warp layers must be in 0..3");
  if (temporal_layers < 0 || temporal_layers > 1)
    throw Error(ErrorCode::InvalidConfig, "temporal warp layers must be 0 or 1");
}

ModelConfig ModelConfig::from_name(std::string_view name) {
  const auto first = name.find('-');
  const auto second = first == std::string_view::npos ? first : name.find('-', first + 1);
  if (second == std::string_view::npos)
    throw Error(ErrorCode::InvalidConfig, "model name must look like FAM-lS-lT, got '" + std::string(name) + "'");
  ModelConfig cfg;
  cfg.spatial_family = parse_kernel_family(name.substr(0, first));
  auto parse_count = [&name](std::string_view text) {
    int v = -1;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(ErrorCode::InvalidConfig, "bad layer count in model name '" + std::string(name) + "'");
    return v;
  };
  cfg.spatial_layers = parse_count(name.substr(first + 1, second - first - 1));
  cfg.temporal_layers = parse_count(name.substr(second + 1));
  cfg.validate();
  return cfg;
}

int ModelConfig::kernel_param_count() const { return (periodic ? 6 : 3) + 1; }

int ModelConfig::param_count() const {
  return kernel_param_count() + spatial_warp_param_count() + temporal_warp_param_count();
}

void ParameterVector::validate() const {
  kernel.validate();
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw Error(ErrorCode::ConstraintViolation, "nugget variance must be positive");
}

double weight_to_unconstrained(double w) {
  if (!(w > kWarpWeightLower && w < kWarpWeightUpper))
    throw Error(ErrorCode::ConstraintViolation, "warp weight " + std::to_string(w) + " not strictly inside bounds");
  const double z = (w - kWarpWeightLower) / (kWarpWeightUpper - kWarpWeightLower);
  return std::log(z / (1.0 - z));
}

double weight_from_unconstrained(double u) {
  return kWarpWeightLower + (kWarpWeightUpper - kWarpWeightLower) * logistic(u);
}

double center_to_unconstrained(double c) {
  if (!(c > 0.0 && c < 1.0))
    throw Error(ErrorCode::ConstraintViolation, "warp center " + std::to_string(c) + " not strictly inside (0,1)");
  return std::log(c / (1.0 - c));
}

double center_from_unconstrained(double u) { return logistic(u); }

std::vector<ParamInfo> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamInfo> out = {{"eta", ParamKind::Positive}, {"rho_s", ParamKind::Positive},
                                {"rho_t", ParamKind::Positive}};
  if (config.periodic) {
    out.push_back({"eta_p", ParamKind::Positive});
    out.push_back({"rho_p", ParamKind::Positive});
    out.push_back({"period", ParamKind::Positive});
  }
  for (int l = 0; l < config.spatial_layers; ++l) {
    const auto p = "spatial_warp[" + std::to_string(l) + "].";
    out.push_back({p + "w1", ParamKind::Weight});
    out.push_back({p + "w2", ParamKind::Weight});
    out.push_back({p + "gamma1", ParamKind::Center});
    out.push_back({p + "gamma2", ParamKind::Center});
    out.push_back({p + "a", ParamKind::Positive});
  }
  for (int l = 0; l < config.temporal_layers; ++l) {
    const auto p = "temporal_warp[" + std::to_string(l) + "].";
    out.push_back({p + "w", ParamKind::Weight});
    out.push_back({p + "gamma", ParamKind::Center});
    out.push_back({p + "a", ParamKind::Positive});
  }
  out.push_back({"sigma2", ParamKind::Positive});
  return out;
}

Eigen::VectorXd to_unconstrained(const ParameterVector& theta, const ModelConfig& config) {
  config.validate();
  const auto& k = theta.kernel;
  if (static_cast<int>(k.spatial_warp.layers.size()) != config.spatial_layers ||
      static_cast<int>(k.temporal_warp.layers.size()) != config.temporal_layers) {
    throw Error(ErrorCode::ConstraintViolation, "parameter warp layers do not match model " + config.name());
  }
  std::vector<double> u;
  u.push_back(positive_to_unconstrained(k.eta, "eta"));
  u.push_back(positive_to_unconstrained(k.rho_s, "rho_s"));
  u.push_back(positive_to_unconstrained(k.rho_t, "rho_t"));
  if (config.periodic) {
    u.push_back(positive_to_unconstrained(k.eta_p, "eta_p"));
    u.push_back(positive_to_unconstrained(k.rho_p, "rho_p"));
    u.push_back(positive_to_unconstrained(k.period, "period"));
  }
  for (const auto& layer : k.spatial_warp.layers) {
    if (layer.dim() != 2) throw Error(ErrorCode::ConstraintViolation, "spatial warp layer must be 2-D");
    u.push_back(weight_to_unconstrained(layer.weights(0)));
    u.push_back(weight_to_unconstrained(layer.weights(1)));
    u.push_back(center_to_unconstrained(layer.center(0)));
    u.push_back(center_to_unconstrained(layer.center(1)));
    u.push_back(positive_to_unconstrained(layer.scale, "warp scale"));
  }
  for (const auto& layer : k.temporal_warp.layers) {
    if (layer.dim() != 1) throw Error(ErrorCode::ConstraintViolation, "temporal warp layer must be 1-D");
    u.push_back(weight_to_unconstrained(layer.weights(0)));
    u.push_back(center_to_unconstrained(layer.center(0)));
    u.push_back(positive_to_unconstrained(layer.scale, "warp scale"));
  }
  u.push_back(positive_to_unconstrained(theta.sigma2, "sigma2"));
  return Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
}

ParameterVector from_unconstrained(const Eigen::VectorXd& u, const ModelConfig& config) {
  config.validate();
  if (u.size() != config.param_count())
    throw Error(ErrorCode::ConstraintViolation, "unconstrained vector has wrong length for " + config.name());
  ParameterVector theta;
  auto& k = theta.kernel;
  k.spatial_family = config.spatial_family;
  k.temporal_family = config.temporal_family;
  Eigen::Index i = 0;
  k.eta = std::exp(u(i++));
  k.rho_s = std::exp(u(i++));
  k.rho_t = std::exp(u(i++));
  if (config.periodic) {
    k.eta_p = std::exp(u(i++));
    k.rho_p = std::exp(u(i++));
    k.period = std::exp(u(i++));
  } else {
    k.eta_p = 0.0;
  }
  k.spatial_warp = WarpStack{2, {}};
  for (int l = 0; l < config.spatial_layers; ++l) {
    RbfLayer layer;
    layer.weights = Eigen::Vector2d(weight_from_unconstrained(u(i)), weight_from_unconstrained(u(i + 1)));
    layer.center = Eigen::Vector2d(center_from_unconstrained(u(i + 2)), center_from_unconstrained(u(i + 3)));
    layer.scale = std::exp(u(i + 4));
    i += 5;
    k.spatial_warp.layers.push_back(std::move(layer));
  }
  k.temporal_warp = WarpStack{1, {}};
  for (int l = 0; l < config.temporal_layers; ++l) {
    RbfLayer layer;
    layer.weights = Eigen::VectorXd::Constant(1, weight_from_unconstrained(u(i)));
    layer.center = Eigen::VectorXd::Constant(1, center_from_unconstrained(u(i + 1)));
    layer.scale = std::exp(u(i + 2));
    i += 3;
    k.temporal_warp.layers.push_back(std::move(layer));
  }
  theta.sigma2 = std::exp(u(i++));
  return theta;
}

}  // namespace wgp
