#include "wgp/synth.hpp"

#include "wgp/error.hpp"
#include "wgp/linalg.hpp"
#include "wgp/model_io.hpp"
#include "wgp/parallel.hpp"
#include "wgp/predict.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace wgp {

namespace {

constexpr std::array<std::array<double, 2>, 27> kStudySites = {{
    {-100.3314, 32.4865}, {-102.4646, 32.3821}, {-101.7958, 31.9498}, {-100.3306, 31.7576}, {-101.9560, 32.1662},
    {-102.9592, 31.4163}, {-101.9343, 31.5703}, {-102.4706, 31.1798}, {-101.8872, 32.2888}, {-102.5839, 31.5645},
    {-100.2158, 31.0367}, {-101.0572, 31.8188}, {-101.4215, 32.1359}, {-102.2789, 32.4272}, {-100.6353, 31.1817},
    {-101.9747, 31.9523}, {-100.7392, 32.4541}, {-102.1199, 32.4437}, {-100.3573, 32.4013}, {-100.1904, 32.2198},
    {-101.7442, 32.1576}, {-102.2038, 31.3860}, {-102.7896, 31.2059}, {-100.1528, 31.2357}, {-101.1675, 32.3614},
    {-100.4071, 31.1990}, {-102.0759, 31.4244},
}};

constexpr std::array<KernelFamily, 4> kStudyFamilies = {KernelFamily::SE, KernelFamily::M52, KernelFamily::M32,
                                                        KernelFamily::M12};

RbfLayer layer2d(double w1, double w2, double g1, double g2, double a) {
  return RbfLayer{Eigen::Vector2d(w1, w2), Eigen::Vector2d(g1, g2), a};
}

GroundTruth study_truth(KernelFamily spatial, WarpStack warp, const StudySettings& s, std::uint64_t seed) {
  GroundTruth gt;
  gt.spec.eta = s.eta;
  gt.spec.spatial_family = spatial;
  gt.spec.rho_s = s.rho_s;
  gt.spec.temporal_family = KernelFamily::M32;
  gt.spec.rho_t = s.rho_t;
  gt.spec.eta_p = 0.0;
  gt.spec.spatial_warp = std::move(warp);
  gt.sigma2 = s.sigma2;
  gt.grid = normalize_inputs(study_sites(), 24, 0.05);
  gt.n_days = s.n_days;
  gt.seed = seed;
  return gt;
}

ModelConfig study_model(KernelFamily spatial, int layers) {
  ModelConfig cfg;
  cfg.spatial_family = spatial;
  cfg.temporal_family = KernelFamily::M32;
  cfg.spatial_layers = layers;
  cfg.temporal_layers = 0;
  cfg.periodic = false;
  return cfg;
}

StudyFit fit_and_score(const std::string& label, const ErrorPanel& panel, const ModelConfig& cfg,
                       const StudySettings& s, std::uint64_t seed) {
  StudyFit out;
  out.label = label;
  out.config = cfg;
  out.model = fit(panel, cfg, s.optimizer, seed);
  const auto pred = test_panel_predictions(out.model, panel);
  std::vector<double> actual, mean, sigma;
  for (Eigen::Index j = 0; j < pred.mean.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.mean.rows(); ++i) {
      actual.push_back(pred.actual(i, j));
      mean.push_back(pred.mean(i, j));
      sigma.push_back(pred.sigma(i));
    }
  }
  const auto report = evaluate_metrics(actual, mean, sigma, {s.coverage_level}, {s.interval_level});
  out.rmse = report.rmse;
  out.ks = report.ks;
  out.coverage = report.coverage.at(s.coverage_level);
  out.avg_interval_score = report.avg_interval_score.at(s.interval_level);
  spdlog::info("{}: loss {:.3f} rmse {:.5f} ({} iters)", label, out.model.training_loss, out.rmse,
               out.model.iterations);
  return out;
}

ErrorPanel split_panel(ErrorPanel panel, const StudySettings& s, std::uint64_t seed) {
  panel.split = make_split(panel.site_ids, panel.days, s.n_test_sites, s.n_test_days, derive_seed(seed, 0x5e11));
  return panel;
}

std::vector<std::string> as_vector(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string warp_text(const WarpStack& stack) {
  std::string out;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const auto& layer = stack.layers[l];
    if (l) out += " | ";
    out += "w=(" + fmt(layer.weights(0), "%.3f") + " " + fmt(layer.weights(1), "%.3f") + ") gamma=(" +
           fmt(layer.center(0), "%.3f") + " " + fmt(layer.center(1), "%.3f") + ") a=" + fmt(layer.scale, "%.3f");
  }
  return out.empty() ? "none" : out;
}

}  // namespace

std::vector<SiteRecord> study_sites() {
  std::vector<SiteRecord> sites;
  for (std::size_t i = 0; i < kStudySites.size(); ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "S%02zu", i + 1);
    sites.push_back(SiteRecord{id, kStudySites[i][0], kStudySites[i][1], "WEST", 100.0});
  }
  return sites;
}

ErrorPanel sample_panel(const GroundTruth& gt) {
  gt.spec.validate();
  if (!(gt.sigma2 > 0.0)) throw Error(ErrorCode::ConstraintViolation, "ground-truth nugget must be positive");
  if (gt.n_days < 1) throw Error(ErrorCode::InvalidRange, "ground truth needs at least one day");
  const int M = gt.grid.num_sites();
  const int T = gt.grid.num_hours();
  Eigen::MatrixXd cov = build_covariance(gt.grid, gt.spec);
  cov.diagonal().array() += gt.sigma2;
  const auto chol = factorize(cov);
  const Eigen::MatrixXd L = chol.llt.matrixL();

  std::mt19937_64 rng(gt.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(M * T, gt.n_days);
  for (int n = 0; n < gt.n_days; ++n)
    for (int i = 0; i < M * T; ++i) z(i, n) = normal(rng);

  ErrorPanel ep;
  for (int m = 0; m < M; ++m) {
    char id[12];
    std::snprintf(id, sizeof id, "S%02d", m + 1);
    ep.site_ids.emplace_back(id);
    ep.zones.emplace_back("SYNTH");
    ep.capacities.push_back(100.0);
  }
  for (int n = 0; n < gt.n_days; ++n) {
    char id[16];
    std::snprintf(id, sizeof id, "day-%03d", n);
    ep.days.emplace_back(id);
  }
  ep.hours = T;
  ep.y = L * z;
  ep.site_means = Eigen::VectorXd::Zero(M);
  ep.grid = gt.grid;
  return ep;
}

KernelEvalResult kernel_eval_study(std::uint64_t seed, const StudySettings& settings) {
  const auto n = static_cast<int>(kStudyFamilies.size());
  std::vector<ErrorPanel> panels;
  KernelEvalResult result;
  result.seed = seed;
  result.truth_sigma2 = settings.sigma2;
  result.cells.resize(static_cast<std::size_t>(n * n));
  for (int ti = 0; ti < n; ++ti) {
    const auto truth = study_truth(kStudyFamilies[ti], WarpStack{2, {}}, settings,
                                   derive_seed(seed, static_cast<std::uint64_t>(kStudyFamilies[ti])));
    panels.push_back(split_panel(sample_panel(truth), settings, seed));
    ParameterVector truth_theta{truth.spec, truth.sigma2};
    const double truth_ll = log_likelihood(truth_theta, panels.back());
    for (int mi = 0; mi < n; ++mi) {
      auto& cell = result.cells[static_cast<std::size_t>(ti * n + mi)];
      cell.truth = kStudyFamilies[ti];
      cell.truth_log_likelihood = truth_ll;
    }
  }
  result.test_sites = as_vector(panels.front().split.test_site_ids);
  parallel_for(n * n, settings.threads, [&](int c) {
    const int ti = c / n;
    const int mi = c % n;
    const auto label = std::string(to_string(kStudyFamilies[ti])) + "/" + std::string(to_string(kStudyFamilies[mi]));
    const auto fit_seed = derive_seed(seed, static_cast<std::uint64_t>(kStudyFamilies[ti]) + 1,
                                      static_cast<std::uint64_t>(kStudyFamilies[mi]) + 1);
    result.cells[static_cast<std::size_t>(c)].fit =
        fit_and_score(label, panels[static_cast<std::size_t>(ti)], study_model(kStudyFamilies[mi], 0), settings,
                      fit_seed);
  });
  return result;
}

WarpStack warp_case_truth(WarpCase c) {
  WarpStack stack{2, {}};
  if (c == WarpCase::W1) {
    stack.layers.push_back(layer2d(-0.70, 1.20, 0.30, 0.60, 0.25));
  } else {
    stack.layers.push_back(layer2d(1.2, 1.0, 0.40, 0.60, 0.18));
    stack.layers.push_back(layer2d(-0.7, 1.5, 0.20, 0.80, 0.25));
  }
  return stack;
}

WarpRecoveryResult warp_recovery_study(WarpCase which, std::uint64_t seed, const StudySettings& settings) {
  WarpRecoveryResult result;
  result.which = which;
  result.seed = seed;
  result.truth = study_truth(KernelFamily::SE, warp_case_truth(which), settings,
                             derive_seed(seed, which == WarpCase::W1 ? 0x3101 : 0x3102));
  const auto panel = split_panel(sample_panel(result.truth), settings, seed);
  result.test_sites = as_vector(panel.split.test_site_ids);

  const int max_layers = which == WarpCase::W1 ? 1 : 2;
  const std::string prefix = which == WarpCase::W1 ? "W1" : "W2";
  result.fits.resize(static_cast<std::size_t>(max_layers + 1));
  parallel_for(max_layers + 1, settings.threads, [&](int i) {
    const int layers = max_layers - i;
    result.fits[static_cast<std::size_t>(i)] =
        fit_and_score(prefix + "(M" + std::to_string(layers) + ")", panel, study_model(KernelFamily::SE, layers),
                      settings, derive_seed(seed, 0x7700 + static_cast<std::uint64_t>(layers)));
  });
  return result;
}

std::string kernel_eval_csv(const std::vector<KernelEvalResult>& runs) {
  std::string csv =
      "seed,truth,model,truth_loss,loss,loss_per_day,bic,eta,rho_t,rho_s,sigma2,sigma,rmse,ks_d,ks_p,c_0.2,avg_is_0.05,"
      "iters\n";
  for (const auto& run : runs) {
    for (const auto& cell : run.cells) {
      const auto& m = cell.fit.model;
      const auto& k = m.theta.kernel;
      csv += std::to_string(run.seed) + "," + std::string(to_string(cell.truth)) + "," +
             std::string(to_string(k.spatial_family)) + "," + fmt(-cell.truth_log_likelihood, "%.4f") + "," +
             fmt(m.training_loss, "%.4f") + "," + fmt(m.training_loss / m.train_days, "%.4f") + "," +
             fmt(m.bic, "%.4f") + "," + fmt(k.eta) + "," + fmt(k.rho_t) + "," + fmt(k.rho_s) + "," +
             fmt(m.theta.sigma2) + "," + fmt(std::sqrt(m.theta.sigma2)) + "," + fmt(cell.fit.rmse) + "," +
             fmt(cell.fit.ks.statistic) + "," + fmt(cell.fit.ks.p_value) + "," + fmt(cell.fit.coverage) + "," +
             fmt(cell.fit.avg_interval_score) + "," + std::to_string(m.iterations) + "\n";
    }
  }
  return csv;
}

std::string warp_recovery_csv(const std::vector<WarpRecoveryResult>& runs) {
  std::string csv = "seed,case,model,bic,loss,eta,rho_t,rho_s,sigma2,sigma,warp,rmse,ks_d,ks_p,c_0.2,avg_is_0.05\n";
  for (const auto& run : runs) {
    const auto tag = run.which == WarpCase::W1 ? "W1" : "W2";
    const auto& t = run.truth;
    csv += std::to_string(run.seed) + "," + tag + ",truth,,," + fmt(t.spec.eta) + "," + fmt(t.spec.rho_t) + "," +
           fmt(t.spec.rho_s) + "," + fmt(t.sigma2) + "," + fmt(std::sqrt(t.sigma2)) + "," +
           warp_text(t.spec.spatial_warp) + ",,,,,\n";
    for (const auto& f : run.fits) {
      const auto& m = f.model;
      const auto& k = m.theta.kernel;
      csv += std::to_string(run.seed) + "," + tag + "," + f.label + "," + fmt(m.bic, "%.4f") + "," +
             fmt(m.training_loss, "%.4f") + "," + fmt(k.eta) + "," + fmt(k.rho_t) + "," + fmt(k.rho_s) + "," +
             fmt(m.theta.sigma2) + "," + fmt(std::sqrt(m.theta.sigma2)) + "," + warp_text(k.spatial_warp) + "," +
             fmt(f.rmse) + "," + fmt(f.ks.statistic) + "," + fmt(f.ks.p_value) + "," + fmt(f.coverage) + "," +
             fmt(f.avg_interval_score) + "\n";
    }
  }
  return csv;
}

std::vector<RuleCheck> kernel_eval_checks(const std::vector<KernelEvalResult>& runs) {
  const auto n = kStudyFamilies.size();
  int rows = 0, matched = 0, cells = 0, nugget_ok = 0, m12_ok = 0;
  double worst_dev = 0.0;
  std::string unmatched, m12_detail;
  for (const auto& run : runs) {
    for (std::size_t ti = 0; ti < n; ++ti) {
      ++rows;
      std::size_t best = 0;
      for (std::size_t mi = 1; mi < n; ++mi)
        if (run.cells[ti * n + mi].fit.model.training_loss < run.cells[ti * n + best].fit.model.training_loss)
          best = mi;
      if (best == ti) {
        ++matched;
      } else {
        unmatched += " seed " + std::to_string(run.seed) + " truth " + std::string(to_string(kStudyFamilies[ti])) +
                     " -> " + std::string(to_string(kStudyFamilies[best])) + ";";
      }
    }
    for (const auto& cell : run.cells) {
      ++cells;
      const double dev = std::abs(cell.fit.model.theta.sigma2 / run.truth_sigma2 - 1.0);
      worst_dev = std::max(worst_dev, dev);
      if (dev <= 0.30) ++nugget_ok;
    }
    const auto& se = run.cells[3 * n + 0].fit;
    const auto& m12 = run.cells[3 * n + 3].fit;
    if (se.rmse > m12.rmse) ++m12_ok;
    m12_detail += " seed " + std::to_string(run.seed) + ": SE " + fmt(se.rmse) + " vs M12 " + fmt(m12.rmse) + ";";
  }
  const int n_runs = static_cast<int>(runs.size());
  std::vector<RuleCheck> out;
  out.push_back({"matched_kernel_lowest_loss", !runs.empty() && matched * 12 >= rows * 10,
                 std::to_string(matched) + "/" + std::to_string(rows) + " rows matched" + unmatched});
  out.push_back({"nugget_recovered_30pct", !runs.empty() && nugget_ok == cells,
                 std::to_string(nugget_ok) + "/" + std::to_string(cells) + " cells, worst deviation " +
                     fmt(worst_dev, "%.3f")});
  out.push_back({"m12_truth_se_rmse_exceeds_m12", !runs.empty() && m12_ok == n_runs,
                 std::to_string(m12_ok) + "/" + std::to_string(n_runs) + m12_detail});
  return out;
}

std::vector<RuleCheck> warp_recovery_checks(const std::vector<WarpRecoveryResult>& runs) {
  std::vector<RuleCheck> out;
  int w1_runs = 0, w1_recovered = 0, w1_rmse_ok = 0;
  int w2_runs = 0, w2_rmse_ok = 0, w2_is_ok = 0;
  std::string w1_detail, w2_detail;
  for (const auto& run : runs) {
    const auto seed = " seed " + std::to_string(run.seed) + ":";
    if (run.which == WarpCase::W1) {
      ++w1_runs;
      const auto& warped = run.fits[0];
      const auto& plain = run.fits[1];
      const auto& fitted = warped.model.theta.kernel.spatial_warp.layers.at(0);
      const auto& truth = run.truth.spec.spatial_warp.layers.at(0);
      const double dw = (fitted.weights - truth.weights).cwiseAbs().maxCoeff();
      const double dg = (fitted.center - truth.center).cwiseAbs().maxCoeff();
      const double da = std::abs(fitted.scale - truth.scale);
      if (dw <= 0.15 && dg <= 0.10 && da <= 0.10) ++w1_recovered;
      if (warped.rmse <= plain.rmse) ++w1_rmse_ok;
      w1_detail += seed + " dw " + fmt(dw, "%.3f") + " dgamma " + fmt(dg, "%.3f") + " da " + fmt(da, "%.3f") +
                   " rmse " + fmt(warped.rmse) + " vs " + fmt(plain.rmse) + ";";
    } else {
      ++w2_runs;
      const auto& two = run.fits[0];
      const auto& one = run.fits[1];
      const auto& zero = run.fits[2];
      const double rel = std::abs(two.rmse - one.rmse) / std::min(two.rmse, one.rmse);
      if (rel < 0.02) ++w2_rmse_ok;
      if (two.avg_interval_score < zero.avg_interval_score && one.avg_interval_score < zero.avg_interval_score)
        ++w2_is_ok;
      w2_detail += seed + " rel rmse " + fmt(rel, "%.4f") + " AvgIS " + fmt(two.avg_interval_score) + "/" +
                   fmt(one.avg_interval_score) + " vs " + fmt(zero.avg_interval_score) + ";";
    }
  }
  if (w1_runs > 0) {
    out.push_back({"w1_warp_recovered", w1_recovered * 3 >= w1_runs * 2,
                   std::to_string(w1_recovered) + "/" + std::to_string(w1_runs) + w1_detail});
    out.push_back({"w1_warped_rmse_not_worse", w1_rmse_ok == w1_runs,
                   std::to_string(w1_rmse_ok) + "/" + std::to_string(w1_runs)});
  }
  if (w2_runs > 0) {
    out.push_back({"w2_layer_rmse_within_2pct", w2_rmse_ok == w2_runs,
                   std::to_string(w2_rmse_ok) + "/" + std::to_string(w2_runs) + w2_detail});
    out.push_back({"w2_warped_avg_is_beats_unwarped", w2_is_ok * 3 >= w2_runs * 2,
                   std::to_string(w2_is_ok) + "/" + std::to_string(w2_runs)});
  }
  return out;
}

nlohmann::json checks_json(const std::vector<RuleCheck>& checks) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : checks) out.push_back({{"rule", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return out;
}

}  // namespace wgp
