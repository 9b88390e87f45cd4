#include "wgp/model_io.hpp"

#include "wgp/error.hpp"

#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <limits>
#include <fstream>
#include <sstream>

namespace wgp {

using nlohmann::json;

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_exact(const json& field) {
  if (field.is_number()) return field.get<double>();
  if (!field.is_string()) throw Error(ErrorCode::MalformedInput, "expected a decimal string, got " + field.dump());
  const auto text = field.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || std::isinf(v))
    throw Error(ErrorCode::MalformedInput, "bad decimal '" + text + "'");
  return v;
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(format_exact(v(i)));
  return arr;
}

Eigen::VectorXd vector_from(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_exact(arr[i]);
  return v;
}

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::MalformedInput, std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json to_json(const WarpStack& stack) {
  json arr = json::array();
  for (const auto& layer : stack.layers) {
    arr.push_back({{"w", vector_json(layer.weights)}, {"gamma", vector_json(layer.center)},
                   {"a", format_exact(layer.scale)}});
  }
  return arr;
}

WarpStack warp_stack_from_json(const json& j, int dim) {
  WarpStack stack{dim, {}};
  for (const auto& item : j) {
    RbfLayer layer;
    layer.weights = vector_from(require(item, "w"));
    layer.center = vector_from(require(item, "gamma"));
    layer.scale = parse_exact(require(item, "a"));
    stack.layers.push_back(std::move(layer));
  }
  stack.validate();
  return stack;
}

json to_json(const InputGrid& grid) {
  json coords = json::array();
  for (Eigen::Index m = 0; m < grid.spatial.rows(); ++m)
    coords.push_back({format_exact(grid.spatial(m, 0)), format_exact(grid.spatial(m, 1))});
  return {{"spatial_coords", coords},
          {"temporal_coords", vector_json(grid.temporal)},
          {"spatial_affine", {{"shift", vector_json(grid.shift)}, {"scale", format_exact(grid.scale)}}},
          {"epsilon_margin", format_exact(grid.epsilon_margin)}};
}

InputGrid input_grid_from_json(const json& j) {
  InputGrid grid;
  const auto& coords = require(j, "spatial_coords");
  grid.spatial.resize(static_cast<Eigen::Index>(coords.size()), 2);
  for (std::size_t m = 0; m < coords.size(); ++m) {
    grid.spatial(static_cast<Eigen::Index>(m), 0) = parse_exact(coords[m].at(0));
    grid.spatial(static_cast<Eigen::Index>(m), 1) = parse_exact(coords[m].at(1));
  }
  grid.temporal = vector_from(require(j, "temporal_coords"));
  const auto& affine = require(j, "spatial_affine");
  grid.shift = vector_from(require(affine, "shift"));
  grid.scale = parse_exact(require(affine, "scale"));
  grid.epsilon_margin = parse_exact(require(j, "epsilon_margin"));
  return grid;
}

json to_json(const FittedModel& model) {
  const auto& k = model.theta.kernel;
  json restarts = json::array();
  for (const auto& r : model.restarts) {
    restarts.push_back({{"signs", r.signs},
                        {"initial_log_likelihood", r.initial_log_likelihood},
                        {"final_log_likelihood", r.final_log_likelihood},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"failed", r.failed},
                        {"failure", r.failure}});
  }
  return {
      {"schema_version", kModelSchemaVersion},
      {"model", model.config.name()},
      {"kernel_families", {{"spatial", to_string(k.spatial_family)}, {"temporal", to_string(k.temporal_family)}}},
      {"periodic", model.config.periodic},
      {"theta_k",
       {{"eta", format_exact(k.eta)},
        {"rho_s", format_exact(k.rho_s)},
        {"rho_t", format_exact(k.rho_t)},
        {"eta_p", format_exact(k.eta_p)},
        {"rho_p", format_exact(k.rho_p)},
        {"period", format_exact(k.period)}}},
      {"sigma2", format_exact(model.theta.sigma2)},
      {"sigma", format_exact(std::sqrt(model.theta.sigma2))},
      {"spatial_warp", to_json(k.spatial_warp)},
      {"temporal_warp", to_json(k.temporal_warp)},
      {"input_grid", to_json(model.grid)},
      {"training",
       {{"log_likelihood", format_exact(model.log_likelihood)},
        {"loss", format_exact(model.training_loss)},
        {"bic", format_exact(model.bic)},
        {"parameter_counts",
         {{"kernel_with_nugget", model.config.kernel_param_count()},
          {"spatial_warp", model.config.spatial_warp_param_count()},
          {"temporal_warp", model.config.temporal_warp_param_count()}}},
        {"train_days", model.train_days},
        {"iters", model.iterations},
        {"restarts", restarts},
        {"seed", model.seed},
        {"loss_trace", model.loss_trace}}}};
}

FittedModel fitted_model_from_json(const json& j) {
  if (require(j, "schema_version").get<int>() != kModelSchemaVersion)
    throw Error(ErrorCode::MalformedInput, "unsupported model schema_version");
  FittedModel model;
  const auto& fam = require(j, "kernel_families");
  model.config = ModelConfig::from_name(require(j, "model").get<std::string>());
  model.config.temporal_family = parse_kernel_family(require(fam, "temporal").get<std::string>());
  model.config.periodic = require(j, "periodic").get<bool>();
  auto& k = model.theta.kernel;
  k.spatial_family = parse_kernel_family(require(fam, "spatial").get<std::string>());
  k.temporal_family = model.config.temporal_family;
  const auto& tk = require(j, "theta_k");
  k.eta = parse_exact(require(tk, "eta"));
  k.rho_s = parse_exact(require(tk, "rho_s"));
  k.rho_t = parse_exact(require(tk, "rho_t"));
  k.eta_p = parse_exact(require(tk, "eta_p"));
  k.rho_p = parse_exact(require(tk, "rho_p"));
  k.period = parse_exact(require(tk, "period"));
  k.spatial_warp = warp_stack_from_json(require(j, "spatial_warp"), 2);
  k.temporal_warp = warp_stack_from_json(require(j, "temporal_warp"), 1);
  model.theta.sigma2 = parse_exact(require(j, "sigma2"));
  model.theta.validate();
  model.grid = input_grid_from_json(require(j, "input_grid"));

  const auto& tr = require(j, "training");
  model.log_likelihood = parse_exact(require(tr, "log_likelihood"));
  model.training_loss = parse_exact(require(tr, "loss"));
  model.bic = parse_exact(require(tr, "bic"));
  model.train_days = require(tr, "train_days").get<int>();
  model.iterations = require(tr, "iters").get<int>();
  model.seed = require(tr, "seed").get<std::uint64_t>();
  model.loss_trace = require(tr, "loss_trace").get<std::vector<double>>();
  for (const auto& r : require(tr, "restarts")) {
    RestartSummary s;
    s.signs = r.at("signs").get<std::vector<int>>();
    s.initial_log_likelihood = r.at("initial_log_likelihood").get<double>();
    s.final_log_likelihood = r.at("final_log_likelihood").get<double>();
    s.iterations = r.at("iterations").get<int>();
    s.converged = r.at("converged").get<bool>();
    s.failed = r.at("failed").get<bool>();
    s.failure = r.at("failure").get<std::string>();
    model.restarts.push_back(std::move(s));
  }
  return model;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  write_text(path, to_json(model).dump(2) + "\n");
}

FittedModel load_model(const std::filesystem::path& path) {
  try {
    return fitted_model_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "model file '" + path.string() + "': " + e.what());
  }
}

void save_bundle(const ErrorPanel& panel, const std::filesystem::path& dir) {
  const int M = panel.num_sites();
  const int T = panel.hours;
  const int N = panel.num_days();
  json meta = {{"schema_version", kBundleSchemaVersion},
               {"counts", {{"M", M}, {"T", T}, {"N", N}}},
               {"site_ids", panel.site_ids},
               {"zones", panel.zones},
               {"capacities", vector_json(Eigen::Map<const Eigen::VectorXd>(panel.capacities.data(), M))},
               {"days", panel.days},
               {"site_means", vector_json(panel.site_means)},
               {"input_grid", to_json(panel.grid)},
               {"split",
                {{"test_site_ids", panel.split.test_site_ids},
                 {"test_day_ids", panel.split.test_day_ids},
                 {"rng_seed", panel.split.rng_seed}}},
               {"clamp_count", panel.clamp_count},
               {"has_ratios", panel.forecast_ratio.size() > 0}};
  write_text(dir / "panel.json", meta.dump(2) + "\n");

  const bool ratios = panel.forecast_ratio.size() > 0;
  std::string csv = "site_id,day,hour,y,forecast_ratio,actual_ratio\n";
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      for (int t = 0; t < T; ++t) {
        const int row = m * T + t;
        csv += panel.site_ids[m] + "," + panel.days[n] + "," + std::to_string(t) + "," +
               format_exact(panel.y(row, n)) + "," + (ratios ? format_exact(panel.forecast_ratio(row, n)) : "") +
               "," + (ratios ? format_exact(panel.actual_ratio(row, n)) : "") + "\n";
      }
    }
  }
  write_text(dir / "cells.csv", csv);
}

ErrorPanel load_bundle(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text(dir / "panel.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "bundle metadata: " + std::string(e.what()));
  }
  if (require(meta, "schema_version").get<int>() != kBundleSchemaVersion)
    throw Error(ErrorCode::MalformedInput, "unsupported bundle schema_version");
  ErrorPanel ep;
  ep.site_ids = require(meta, "site_ids").get<std::vector<std::string>>();
  ep.zones = require(meta, "zones").get<std::vector<std::string>>();
  const auto caps = vector_from(require(meta, "capacities"));
  ep.capacities.assign(caps.data(), caps.data() + caps.size());
  ep.days = require(meta, "days").get<std::vector<std::string>>();
  ep.site_means = vector_from(require(meta, "site_means"));
  ep.grid = input_grid_from_json(require(meta, "input_grid"));
  ep.hours = ep.grid.num_hours();
  const auto& split = require(meta, "split");
  ep.split.test_site_ids = split.at("test_site_ids").get<std::set<std::string>>();
  ep.split.test_day_ids = split.at("test_day_ids").get<std::set<std::string>>();
  ep.split.rng_seed = split.at("rng_seed").get<std::uint64_t>();
  ep.clamp_count = require(meta, "clamp_count").get<long>();
  const bool ratios = require(meta, "has_ratios").get<bool>();

  const int M = ep.num_sites();
  const int T = ep.hours;
  const int N = ep.num_days();
  ep.y = Eigen::MatrixXd::Constant(M * T, N, std::numeric_limits<double>::quiet_NaN());
  if (ratios) {
    ep.forecast_ratio.resize(M * T, N);
    ep.actual_ratio.resize(M * T, N);
  }
  std::istringstream in(read_text(dir / "cells.csv"));
  std::string line;
  std::getline(in, line);
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw Error(ErrorCode::MalformedInput, "cells.csv line " + std::to_string(line_no));
    const int m = ep.site_index(f[0]);
    const int n = ep.day_index(f[1]);
    const int t = std::stoi(f[2]);
    if (t < 0 || t >= T) throw Error(ErrorCode::MalformedInput, "cells.csv line " + std::to_string(line_no));
    ep.y(m * T + t, n) = parse_exact(json(f[3]));
    if (ratios) {
      ep.forecast_ratio(m * T + t, n) = parse_exact(json(f[4]));
      ep.actual_ratio(m * T + t, n) = parse_exact(json(f[5]));
    }
  }
  if (ep.y.hasNaN()) throw Error(ErrorCode::MissingCell, "bundle cells.csv is incomplete");
  return ep;
}

}  // namespace wgp
