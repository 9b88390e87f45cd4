#include "wgp/cli.hpp"

#include "wgp/error.hpp"
#include "wgp/metrics.hpp"
#include "wgp/model_io.hpp"
#include "wgp/panel.hpp"
#include "wgp/predict.hpp"
#include "wgp/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace wgp {

namespace {

// Rejects keys outside `allowed`, naming the section for the diagnostic.
void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, section + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + section);
  }
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, section + "." + key + ": " + e.what());
  }
}

void read_path(const json& j, const char* key, fs::path& dst, const fs::path& base, const std::string& section) {
  std::string s;
  read(j, key, s, section);
  if (!s.empty()) dst = fs::path(s).is_absolute() ? fs::path(s) : base / s;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string level_key(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

ErrorPanel load_panel_bundle(const RunConfig& cfg) {
  return load_bundle(cfg.data.bundle_dir.empty() ? cfg.out : cfg.data.bundle_dir);
}

fs::path model_path(const RunConfig& cfg) {
  return cfg.data.model_path.empty() ? cfg.out / "model.json" : cfg.data.model_path;
}

int site_of(const ErrorPanel& ep, const std::string& id) {
  const int m = ep.site_index(id);
  if (m < 0) throw Error(ErrorCode::UnknownSite, "unknown site '" + id + "'");
  return m;
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "config", {"schema_version", "data", "split", "model", "optimizer", "metrics", "simulate", "synth",
                           "variogram", "seed", "threads", "out"});
  if (!j.contains("schema_version")) throw Error(ErrorCode::InvalidConfig, "config is missing schema_version");
  int version = 0;
  read(j, "schema_version", version, "config");
  if (version != kConfigSchemaVersion)
    throw Error(ErrorCode::InvalidConfig, "unsupported schema_version " + std::to_string(version));

  RunConfig cfg;
  read(j, "seed", cfg.seed, "config");
  read(j, "threads", cfg.threads, "config");
  read_path(j, "out", cfg.out, base_dir, "config");

  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"panel_csv", "bundle_dir", "model_path", "hours", "exclude_sites", "epsilon_margin"});
    read_path(d, "panel_csv", cfg.data.panel_csv, base_dir, "data");
    read_path(d, "bundle_dir", cfg.data.bundle_dir, base_dir, "data");
    read_path(d, "model_path", cfg.data.model_path, base_dir, "data");
    read(d, "hours", cfg.data.hours, "data");
    read(d, "exclude_sites", cfg.data.exclude_sites, "data");
    read(d, "epsilon_margin", cfg.data.epsilon_margin, "data");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, "split", {"test_sites", "test_days", "n_test_sites", "n_test_days", "seed"});
    read(s, "test_sites", cfg.split.test_sites, "split");
    read(s, "test_days", cfg.split.test_days, "split");
    read(s, "n_test_sites", cfg.split.n_test_sites, "split");
    read(s, "n_test_days", cfg.split.n_test_days, "split");
    if (s.contains("seed")) {
      std::uint64_t seed = 0;
      read(s, "seed", seed, "split");
      cfg.split.seed = seed;
    }
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"name", "periodic"});
    read(m, "name", cfg.model_name, "model");
    read(m, "periodic", cfg.periodic, "model");
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, "optimizer", {"learning_rate", "max_iters", "convergence_tol", "convergence_window", "beta1",
                                "beta2", "eps", "restart_cap", "warmup_iters", "gradient_mode", "fd_step"});
    auto& opt = cfg.optimizer;
    read(o, "learning_rate", opt.learning_rate, "optimizer");
    read(o, "max_iters", opt.max_iters, "optimizer");
    read(o, "convergence_tol", opt.convergence_tol, "optimizer");
    read(o, "convergence_window", opt.convergence_window, "optimizer");
    read(o, "beta1", opt.adam_beta1, "optimizer");
    read(o, "beta2", opt.adam_beta2, "optimizer");
    read(o, "eps", opt.adam_eps, "optimizer");
    read(o, "restart_cap", opt.restart_cap, "optimizer");
    read(o, "warmup_iters", opt.warmup_iters, "optimizer");
    read(o, "fd_step", opt.fd_step, "optimizer");
    std::string mode = "hybrid";
    read(o, "gradient_mode", mode, "optimizer");
    if (mode == "hybrid") {
      opt.gradient_mode = GradientMode::Hybrid;
    } else if (mode == "finite_difference") {
      opt.gradient_mode = GradientMode::FullFd;
    } else {
      throw Error(ErrorCode::InvalidConfig, "optimizer.gradient_mode must be hybrid or finite_difference");
    }
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    check_keys(m, "metrics", {"coverage_levels", "interval_levels"});
    read(m, "coverage_levels", cfg.coverage_levels, "metrics");
    read(m, "interval_levels", cfg.interval_levels, "metrics");
  }
  if (j.contains("simulate")) {
    const auto& s = j["simulate"];
    check_keys(s, "simulate",
               {"day", "mode", "targets", "observed", "zones", "n_scenarios", "band_levels", "include_nugget"});
    auto& sim = cfg.simulate;
    read(s, "day", sim.day, "simulate");
    read(s, "mode", sim.mode, "simulate");
    read(s, "targets", sim.targets, "simulate");
    read(s, "observed", sim.observed, "simulate");
    read(s, "zones", sim.zones, "simulate");
    read(s, "n_scenarios", sim.n_scenarios, "simulate");
    read(s, "band_levels", sim.band_levels, "simulate");
    read(s, "include_nugget", sim.include_nugget, "simulate");
    if (sim.mode != "unconditional" && sim.mode != "conditional")
      throw Error(ErrorCode::InvalidConfig, "simulate.mode must be unconditional or conditional");
    if (sim.n_scenarios < 1) throw Error(ErrorCode::InvalidConfig, "simulate.n_scenarios must be positive");
    for (double l : sim.band_levels)
      if (!(l > 0.0 && l < 1.0)) throw Error(ErrorCode::InvalidConfig, "band levels must lie in (0,1)");
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, "synth", {"study", "seeds"});
    read(s, "study", cfg.synth.study, "synth");
    read(s, "seeds", cfg.synth.seeds, "synth");
    if (cfg.synth.study != "kernel_eval" && cfg.synth.study != "w1" && cfg.synth.study != "w2")
      throw Error(ErrorCode::InvalidConfig, "synth.study must be kernel_eval, w1 or w2");
    if (cfg.synth.seeds.empty()) throw Error(ErrorCode::InvalidConfig, "synth.seeds is empty");
  }
  if (j.contains("variogram")) {
    const auto& v = j["variogram"];
    check_keys(v, "variogram", {"max_lag", "grouping"});
    read(v, "max_lag", cfg.variogram.max_lag, "variogram");
    read(v, "grouping", cfg.variogram.grouping, "variogram");
  }

  if (cfg.threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be at least 1");
  auto model = ModelConfig::from_name(cfg.model_name);
  model.periodic = cfg.periodic;
  model.validate();
  try {
    cfg.optimizer.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

void cmd_ingest(const RunConfig& cfg) {
  if (cfg.data.panel_csv.empty()) throw Error(ErrorCode::InvalidConfig, "data.panel_csv is required for ingest");
  std::ifstream in(cfg.data.panel_csv);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + cfg.data.panel_csv.string());
  SitePanel panel;
  try {
    panel = ingest_panel(in, cfg.data.hours);
  } catch (const Error& e) {
    throw Error(e.code(), cfg.data.panel_csv.string() + ": " + e.what());
  }
  panel = exclude_sites(panel, {cfg.data.exclude_sites.begin(), cfg.data.exclude_sites.end()});

  std::vector<std::string> ids;
  for (const auto& s : panel.sites) ids.push_back(s.site_id);
  const auto split_seed = cfg.split.seed.value_or(cfg.seed);
  SplitSpec split = make_split(ids, panel.days, cfg.split.test_sites.empty() ? cfg.split.n_test_sites : 0,
                               cfg.split.test_days.empty() ? cfg.split.n_test_days : 0, split_seed);
  if (!cfg.split.test_sites.empty()) split.test_site_ids = {cfg.split.test_sites.begin(), cfg.split.test_sites.end()};
  if (!cfg.split.test_days.empty()) split.test_day_ids = {cfg.split.test_days.begin(), cfg.split.test_days.end()};
  for (const auto& s : split.test_site_ids)
    if (std::find(ids.begin(), ids.end(), s) == ids.end())
      throw Error(ErrorCode::UnknownSite, "split names unknown site '" + s + "'");
  for (const auto& d : split.test_day_ids)
    if (std::find(panel.days.begin(), panel.days.end(), d) == panel.days.end())
      throw Error(ErrorCode::UnknownDay, "split names unknown day '" + d + "'");

  const auto ep = compute_error_panel(panel, split, cfg.data.epsilon_margin);
  save_bundle(ep, cfg.out);
  spdlog::info("ingested M={} T={} N={} into {}", ep.num_sites(), ep.hours, ep.num_days(), cfg.out.string());
}

void cmd_fit(const RunConfig& cfg) {
  const auto ep = load_panel_bundle(cfg);
  auto model_cfg = ModelConfig::from_name(cfg.model_name);
  model_cfg.periodic = cfg.periodic;
  auto opt = cfg.optimizer;
  opt.threads = cfg.threads;
  const auto model = fit(ep, model_cfg, opt, cfg.seed);
  save_model(model, model_path(cfg));

  json report;
  report["model"] = model.config.name();
  report["log_likelihood"] = format_exact(model.log_likelihood);
  report["loss"] = format_exact(model.training_loss);
  report["bic"] = format_exact(model.bic);
  report["iterations"] = model.iterations;
  json trace = json::array();
  for (double v : model.loss_trace) trace.push_back(format_exact(v));
  report["loss_trace"] = trace;
  json restarts = json::array();
  for (const auto& r : model.restarts) {
    restarts.push_back({{"signs", r.signs},
                        {"initial_log_likelihood", format_exact(r.initial_log_likelihood)},
                        {"final_log_likelihood", format_exact(r.final_log_likelihood)},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"failed", r.failed},
                        {"failure", r.failure}});
  }
  report["restarts"] = restarts;
  write_text(cfg.out / "fit_report.json", report.dump(2) + "\n");
  spdlog::info("fitted {}: log-likelihood {:.4f}, BIC {:.4f}", model.config.name(), model.log_likelihood, model.bic);
}

void cmd_eval(const RunConfig& cfg) {
  const auto ep = load_panel_bundle(cfg);
  const auto model = load_model(model_path(cfg));
  const auto pred = test_panel_predictions(model, ep);
  std::vector<double> actual, mean, sigma;
  for (Eigen::Index j = 0; j < pred.mean.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.mean.rows(); ++i) {
      actual.push_back(pred.actual(i, j));
      mean.push_back(pred.mean(i, j));
      sigma.push_back(pred.sigma(i));
    }
  }
  const auto r = evaluate_metrics(actual, mean, sigma, cfg.coverage_levels, cfg.interval_levels);
  json out;
  out["model"] = model.config.name();
  out["bic"] = model.bic;
  out["rmse"] = r.rmse;
  out["ks"] = {{"D", r.ks.statistic}, {"p", r.ks.p_value}};
  json cov = json::object(), is = json::object();
  for (const auto& [level, v] : r.coverage) cov[level_key(level)] = v;
  for (const auto& [level, v] : r.avg_interval_score) is[level_key(level)] = v;
  out["coverage"] = cov;
  out["avg_is"] = is;
  out["counts"] = {{"sites", r.sites}, {"hours", r.hours}, {"days", r.days}, {"n", actual.size()}};
  write_text(cfg.out / "metrics.json", out.dump(2) + "\n");
  spdlog::info("rmse {:.5f}, KS p {:.4f}", r.rmse, r.ks.p_value);
}

void cmd_simulate(const RunConfig& cfg) {
  const auto ep = load_panel_bundle(cfg);
  const auto model = load_model(model_path(cfg));
  const auto& sim = cfg.simulate;
  if (sim.day.empty()) throw Error(ErrorCode::InvalidConfig, "simulate.day is required");
  const int day = ep.day_index(sim.day);
  if (day < 0) throw Error(ErrorCode::UnknownDay, "unknown day '" + sim.day + "'");
  if (ep.forecast_ratio.cols() != ep.num_days())
    throw Error(ErrorCode::MalformedInput, "bundle carries no forecast ratios");
  const int T = ep.hours;

  std::vector<int> target_sites;
  if (sim.targets.empty()) {
    for (int m = 0; m < ep.num_sites(); ++m) target_sites.push_back(m);
  } else {
    for (const auto& id : sim.targets) target_sites.push_back(site_of(ep, id));
  }
  std::vector<Observation> observed;
  if (sim.mode == "conditional") {
    std::vector<int> obs_sites;
    if (sim.observed.empty()) {
      for (int m = 0; m < ep.num_sites(); ++m)
        if (std::find(target_sites.begin(), target_sites.end(), m) == target_sites.end()) obs_sites.push_back(m);
    } else {
      for (const auto& id : sim.observed) obs_sites.push_back(site_of(ep, id));
    }
    for (int m : obs_sites)
      for (int t = 0; t < T; ++t) observed.push_back({{m, t}, ep.at(m, t, day)});
  }

  std::vector<SiteHour> targets;
  Eigen::VectorXd forecast(static_cast<Eigen::Index>(target_sites.size()) * T);
  Eigen::VectorXd means(forecast.size());
  for (int m : target_sites) {
    for (int t = 0; t < T; ++t) {
      const auto j = static_cast<Eigen::Index>(targets.size());
      forecast(j) = ep.forecast_ratio(m * T + t, day);
      means(j) = ep.site_means(m);
      targets.push_back({m, t});
    }
  }

  const auto dist = posterior(model, observed, targets);
  auto errors = sample_scenarios(dist, sim.n_scenarios, cfg.seed, sim.include_nugget, cfg.threads);
  errors.conditioning = sim.mode;
  const auto ratios = to_power_ratio(errors, forecast, means);

  std::ostringstream scen;
  scen << "scenario_id,site_id,day,hour,value\n";
  for (Eigen::Index s = 0; s < ratios.samples.rows(); ++s)
    for (std::size_t j = 0; j < targets.size(); ++j)
      scen << s << ',' << ep.site_ids[static_cast<std::size_t>(targets[j].site)] << ',' << sim.day << ','
           << targets[j].hour << ','
           << num(ratios.samples(s, static_cast<Eigen::Index>(j))) << '\n';
  write_text(cfg.out / "scenarios.csv", scen.str());

  const auto site_bands = quantile_bands(ratios.samples, sim.band_levels);
  std::ostringstream bands;
  bands << "site_id,day,hour,level,lower,upper,mean\n";
  for (std::size_t j = 0; j < targets.size(); ++j)
    for (std::size_t l = 0; l < sim.band_levels.size(); ++l) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto ll = static_cast<Eigen::Index>(l);
      bands << ep.site_ids[static_cast<std::size_t>(targets[j].site)] << ',' << sim.day << ',' << targets[j].hour << ','
            << level_key(sim.band_levels[l]) << ',' << num(site_bands.lower(jj, ll)) << ','
            << num(site_bands.upper(jj, ll)) << ',' << num(site_bands.mean(jj)) << '\n';
    }
  write_text(cfg.out / "bands_sites.csv", bands.str());

  std::set<std::string> wanted(sim.zones.begin(), sim.zones.end());
  std::set<std::string> present;
  for (int m : target_sites)
    if (!ep.zones[static_cast<std::size_t>(m)].empty()) present.insert(ep.zones[static_cast<std::size_t>(m)]);
  for (const auto& z : wanted)
    if (!present.count(z)) throw Error(ErrorCode::UnknownZone, "no target site in zone '" + z + "'");
  if (wanted.empty()) wanted = present;

  ScenarioSet zoned;
  zoned.seed = ratios.seed;
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < targets.size(); ++j)
    if (wanted.count(ep.zones[static_cast<std::size_t>(targets[j].site)])) {
      cols.push_back(static_cast<Eigen::Index>(j));
      zoned.targets.push_back(targets[j]);
    }
  zoned.samples.resize(ratios.samples.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    zoned.samples.col(static_cast<Eigen::Index>(c)) = ratios.samples.col(cols[c]);

  std::ostringstream zone_csv;
  zone_csv << "zone,day,hour,level,lower,upper,mean\n";
  if (!zoned.targets.empty()) {
    for (const auto& [zone, series] : aggregate_zone(zoned, ep.capacities, ep.zones)) {
      const auto zb = quantile_bands(series.ratios, sim.band_levels);
      for (std::size_t h = 0; h < series.hours.size(); ++h)
        for (std::size_t l = 0; l < sim.band_levels.size(); ++l) {
          const auto hh = static_cast<Eigen::Index>(h);
          const auto ll = static_cast<Eigen::Index>(l);
          zone_csv << zone << ',' << sim.day << ',' << series.hours[h] << ',' << level_key(sim.band_levels[l]) << ','
                   << num(zb.lower(hh, ll)) << ',' << num(zb.upper(hh, ll)) << ',' << num(zb.mean(hh)) << '\n';
        }
    }
  }
  write_text(cfg.out / "bands_zones.csv", zone_csv.str());
  spdlog::info("{} {} scenarios for {} targets on {}", sim.n_scenarios, sim.mode, targets.size(), sim.day);
}

void cmd_synth(const RunConfig& cfg) {
  StudySettings settings;
  settings.optimizer = cfg.optimizer;
  settings.optimizer.threads = 1;
  settings.threads = cfg.threads;
  std::string csv;
  std::vector<RuleCheck> checks;
  if (cfg.synth.study == "kernel_eval") {
    std::vector<KernelEvalResult> runs;
    for (auto seed : cfg.synth.seeds) runs.push_back(kernel_eval_study(seed, settings));
    csv = kernel_eval_csv(runs);
    checks = kernel_eval_checks(runs);
  } else {
    const auto which = cfg.synth.study == "w1" ? WarpCase::W1 : WarpCase::W2;
    std::vector<WarpRecoveryResult> runs;
    for (auto seed : cfg.synth.seeds) runs.push_back(warp_recovery_study(which, seed, settings));
    csv = warp_recovery_csv(runs);
    checks = warp_recovery_checks(runs);
  }
  write_text(cfg.out / (cfg.synth.study + ".csv"), csv);
  json summary;
  summary["study"] = cfg.synth.study;
  summary["seeds"] = cfg.synth.seeds;
  summary["rules"] = checks_json(checks);
  write_text(cfg.out / (cfg.synth.study + "_summary.json"), summary.dump(2) + "\n");
  for (const auto& c : checks) spdlog::info("{}: {} ({})", c.name, c.passed ? "pass" : "FAIL", c.detail);
}

void cmd_variogram(const RunConfig& cfg) {
  const auto ep = load_panel_bundle(cfg);
  auto write_cloud = [&](const VariogramCloud& cloud, const char* name) {
    std::ostringstream os;
    os << "d,v,site_a,site_b\n";
    for (const auto& p : cloud) os << num(p.d) << ',' << num(p.v) << ',' << p.id_a << ',' << p.id_b << '\n';
    write_text(cfg.out / name, os.str());
  };
  write_cloud(spatial_variogram(ep), "variogram_spatial.csv");
  write_cloud(temporal_variogram(ep), "variogram_temporal.csv");
  std::ostringstream acf;
  acf << "region,lag,acf\n";
  const int max_lag = cfg.variogram.max_lag < 0 ? ep.hours - 1 : cfg.variogram.max_lag;
  for (const auto& row : regional_acf(ep, max_lag, cfg.variogram.grouping))
    acf << row.region << ',' << row.lag << ',' << num(row.acf) << '\n';
  write_text(cfg.out / "acf.csv", acf.str());
}

int run_cli(int argc, char** argv) {
  if (!spdlog::get("wgp")) spdlog::set_default_logger(spdlog::stderr_color_mt("wgp"));

  CLI::App app{"Warped Gaussian process forecast-error models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "Master seed (overrides config)");
  app.add_option("--out", out, "Output directory (overrides config)");
  app.add_option("--threads", threads, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  const std::vector<std::pair<const char*, void (*)(const RunConfig&)>> commands = {
      {"ingest", cmd_ingest}, {"fit", cmd_fit},     {"eval", cmd_eval},
      {"simulate", cmd_simulate}, {"synth", cmd_synth}, {"variogram", cmd_variogram},
  };
  const std::map<std::string, std::string> help = {
      {"ingest", "Build an error-panel bundle from a panel CSV"},
      {"fit", "Fit a model to the training slice of a bundle"},
      {"eval", "Score test-panel predictions"},
      {"simulate", "Sample ratio-space scenarios and quantile bands"},
      {"synth", "Run a synthetic study"},
      {"variogram", "Write variogram and ACF diagnostics"},
  };
  for (const auto& [name, _] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cout, std::cerr);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    auto cfg = load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    if (threads) cfg.threads = *threads;
    fs::create_directories(cfg.out);
    for (const auto& [name, run] : commands)
      if (app.got_subcommand(name)) run(cfg);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace wgp
