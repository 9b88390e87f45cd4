#include "wgp/panel.hpp"

#include "wgp/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace wgp {

namespace {

constexpr std::string_view kPanelHeader =
    "site_id,longitude,latitude,zone,capacity_mw,day,hour,actual_mw,forecast_mw";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& text, long line_no, std::string_view column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": column " +
                                               std::string(column) + " is not a finite number: '" +
                                               text + "'");
  }
  return value;
}

int parse_int(const std::string& text, long line_no, std::string_view column) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": column " +
                                               std::string(column) + " is not an integer: '" +
                                               text + "'");
  }
  return value;
}

bool looks_like_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 4 || i == 7) continue;
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

}  // namespace

Eigen::Vector2d InputGrid::normalize(double longitude, double latitude) const {
  return Eigen::Vector2d((longitude - shift(0)) / scale + epsilon_margin,
                         (latitude - shift(1)) / scale + epsilon_margin);
}

std::vector<int> ErrorPanel::training_days() const {
  std::vector<int> out;
  for (int n = 0; n < num_days(); ++n)
    if (!split.test_day_ids.contains(days[n])) out.push_back(n);
  return out;
}

std::vector<int> ErrorPanel::test_days() const {
  std::vector<int> out;
  for (int n = 0; n < num_days(); ++n)
    if (split.test_day_ids.contains(days[n])) out.push_back(n);
  return out;
}

std::vector<int> ErrorPanel::training_sites() const {
  std::vector<int> out;
  for (int m = 0; m < num_sites(); ++m)
    if (!split.test_site_ids.contains(site_ids[m])) out.push_back(m);
  return out;
}

std::vector<int> ErrorPanel::test_sites() const {
  std::vector<int> out;
  for (int m = 0; m < num_sites(); ++m)
    if (split.test_site_ids.contains(site_ids[m])) out.push_back(m);
  return out;
}

Eigen::MatrixXd ErrorPanel::training_matrix() const {
  const auto cols = training_days();
  Eigen::MatrixXd out(y.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = y.col(cols[j]);
  return out;
}

int ErrorPanel::site_index(const std::string& id) const {
  auto it = std::find(site_ids.begin(), site_ids.end(), id);
  if (it == site_ids.end()) throw Error(ErrorCode::UnknownSite, "unknown site '" + id + "'");
  return static_cast<int>(it - site_ids.begin());
}

int ErrorPanel::day_index(const std::string& id) const {
  auto it = std::find(days.begin(), days.end(), id);
  if (it == days.end()) throw Error(ErrorCode::UnknownDay, "unknown day '" + id + "'");
  return static_cast<int>(it - days.begin());
}

SitePanel ingest_panel(std::istream& csv, int hours) {
  std::string line;
  if (!std::getline(csv, line)) throw Error(ErrorCode::MalformedInput, "empty CSV input");
  if (trim(line) != kPanelHeader) {
    throw Error(ErrorCode::MalformedInput, "line 1: expected header '" + std::string(kPanelHeader) + "'");
  }

  struct Row {
    int site;
    std::string day;
    int hour;
    double actual;
    double forecast;
    long line_no;
  };
  std::vector<SiteRecord> sites;
  std::unordered_map<std::string, int> site_lookup;
  std::vector<Row> rows;
  std::set<std::string> day_set;

  long line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 9) {
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(line_no) + ": expected 9 fields, found " + std::to_string(f.size()));
    }
    for (auto& field : f) field = trim(field);
    SiteRecord rec{f[0], parse_double(f[1], line_no, "longitude"), parse_double(f[2], line_no, "latitude"), f[3],
                   parse_double(f[4], line_no, "capacity_mw")};
    if (rec.site_id.empty()) {
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": empty site_id");
    }
    if (rec.capacity <= 0.0) {
      throw Error(ErrorCode::NonpositiveCapacity,
                  "line " + std::to_string(line_no) + ": site '" + rec.site_id + "' has capacity " + f[4]);
    }
    if (!looks_like_iso_date(f[5])) {
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(line_no) + ": day '" + f[5] + "' is not an ISO-8601 date");
    }
    const int hour = parse_int(f[6], line_no, "hour");
    if (hour < 0 || hour >= hours) {
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(line_no) + ": hour " + f[6] + " outside 0.." + std::to_string(hours - 1));
    }
    const double actual = parse_double(f[7], line_no, "actual_mw");
    const double forecast = parse_double(f[8], line_no, "forecast_mw");
    if (actual < 0.0) {
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": negative actual_mw");
    }

    auto [it, inserted] = site_lookup.try_emplace(rec.site_id, static_cast<int>(sites.size()));
    if (inserted) {
      sites.push_back(rec);
    } else {
      const auto& known = sites[it->second];
      if (known.longitude != rec.longitude || known.latitude != rec.latitude || known.zone != rec.zone ||
          known.capacity != rec.capacity) {
        throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": site '" + rec.site_id +
                                                   "' metadata differs from its first row");
      }
    }
    day_set.insert(f[5]);
    rows.push_back(Row{it->second, f[5], hour, actual, forecast, line_no});
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "CSV has a header but no data rows");

  for (std::size_t a = 0; a < sites.size(); ++a) {
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      if (sites[a].longitude == sites[b].longitude && sites[a].latitude == sites[b].latitude) {
        throw Error(ErrorCode::MalformedInput,
                    "sites '" + sites[a].site_id + "' and '" + sites[b].site_id + "' share coordinates");
      }
    }
  }

  SitePanel panel;
  panel.sites = std::move(sites);
  panel.days.assign(day_set.begin(), day_set.end());
  panel.hours = hours;
  const auto M = panel.num_sites();
  const auto N = panel.num_days();
  std::unordered_map<std::string, int> day_lookup;
  for (int n = 0; n < N; ++n) day_lookup[panel.days[n]] = n;

  constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  panel.actual = Eigen::MatrixXd::Constant(M * hours, N, kUnset);
  panel.forecast = Eigen::MatrixXd::Constant(M * hours, N, kUnset);
  for (const auto& r : rows) {
    const int n = day_lookup.at(r.day);
    const int row = r.site * hours + r.hour;
    if (!std::isnan(panel.actual(row, n))) {
      throw Error(ErrorCode::DuplicateRow, "line " + std::to_string(r.line_no) + ": duplicate row for site '" +
                                               panel.sites[r.site].site_id + "', day " + r.day + ", hour " +
                                               std::to_string(r.hour));
    }
    panel.actual(row, n) = r.actual;
    panel.forecast(row, n) = r.forecast;
  }
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      for (int t = 0; t < hours; ++t) {
        if (std::isnan(panel.actual(m * hours + t, n))) {
          throw Error(ErrorCode::MissingCell, "no row for site '" + panel.sites[m].site_id + "', day " +
                                                  panel.days[n] + ", hour " + std::to_string(t));
        }
      }
    }
  }
  return panel;
}

SitePanel exclude_sites(const SitePanel& panel, const std::set<std::string>& excluded) {
  std::vector<int> keep;
  for (int m = 0; m < panel.num_sites(); ++m)
    if (!excluded.contains(panel.sites[m].site_id)) keep.push_back(m);
  SitePanel out;
  out.days = panel.days;
  out.hours = panel.hours;
  const int T = panel.hours;
  out.actual.resize(static_cast<Eigen::Index>(keep.size()) * T, panel.num_days());
  out.forecast.resize(out.actual.rows(), out.actual.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.sites.push_back(panel.sites[keep[k]]);
    out.actual.middleRows(static_cast<Eigen::Index>(k) * T, T) = panel.actual.middleRows(keep[k] * T, T);
    out.forecast.middleRows(static_cast<Eigen::Index>(k) * T, T) = panel.forecast.middleRows(keep[k] * T, T);
  }
  return out;
}

SplitSpec make_split(const std::vector<std::string>& site_ids, const std::vector<std::string>& day_ids,
                     int n_test_sites, int n_test_days, std::uint64_t seed) {
  if (n_test_sites < 0 || n_test_sites > static_cast<int>(site_ids.size()) || n_test_days < 0 ||
      n_test_days > static_cast<int>(day_ids.size())) {
    throw Error(ErrorCode::InvalidConfig, "test split larger than the panel");
  }
  std::mt19937_64 rng(seed);
  auto draw = [&rng](std::vector<std::string> pool, int count) {
    std::set<std::string> chosen;
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
      chosen.insert(pool[static_cast<std::size_t>(i)]);
    }
    return chosen;
  };
  SplitSpec split;
  split.rng_seed = seed;
  split.test_site_ids = draw(site_ids, n_test_sites);
  split.test_day_ids = draw(day_ids, n_test_days);
  return split;
}

InputGrid normalize_inputs(const std::vector<SiteRecord>& sites, int hours, double eps) {
  if (!(eps > 0.0 && eps < 0.25)) throw Error(ErrorCode::InvalidRange, "epsilon margin must lie in (0, 0.25)");
  if (sites.empty()) throw Error(ErrorCode::EmptyInput, "no sites to normalize");
  if (hours < 1) throw Error(ErrorCode::InvalidRange, "hour count must be positive");

  const auto M = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixX2d raw(M, 2);
  for (Eigen::Index m = 0; m < M; ++m) {
    raw(m, 0) = sites[static_cast<std::size_t>(m)].longitude;
    raw(m, 1) = sites[static_cast<std::size_t>(m)].latitude;
  }
  const Eigen::Vector2d lo = raw.colwise().minCoeff().transpose();
  const Eigen::Vector2d range = raw.colwise().maxCoeff().transpose() - lo;
  const double extent = range.maxCoeff();
  if (!(extent > 0.0)) throw Error(ErrorCode::DegenerateExtent, "all sites share one location");

  InputGrid grid;
  grid.shift = lo;
  grid.scale = extent / (1.0 - 2.0 * eps);
  grid.epsilon_margin = eps;
  grid.spatial.resize(M, 2);
  for (Eigen::Index m = 0; m < M; ++m) grid.spatial.row(m) = grid.normalize(raw(m, 0), raw(m, 1)).transpose();
  grid.temporal.resize(hours);
  for (int j = 0; j < hours; ++j) grid.temporal(j) = (j + 0.5) / hours;
  return grid;
}

ErrorPanel compute_error_panel(const SitePanel& panel, const SplitSpec& split, double eps) {
  const int M = panel.num_sites();
  const int N = panel.num_days();
  const int T = panel.hours;
  for (const auto& id : split.test_site_ids) {
    if (std::none_of(panel.sites.begin(), panel.sites.end(), [&](const SiteRecord& s) { return s.site_id == id; }))
      throw Error(ErrorCode::UnknownSite, "test site '" + id + "' not in panel");
  }
  for (const auto& id : split.test_day_ids) {
    if (std::find(panel.days.begin(), panel.days.end(), id) == panel.days.end())
      throw Error(ErrorCode::UnknownDay, "test day '" + id + "' not in panel");
  }

  ErrorPanel ep;
  ep.days = panel.days;
  ep.hours = T;
  ep.split = split;
  for (const auto& s : panel.sites) {
    ep.site_ids.push_back(s.site_id);
    ep.zones.push_back(s.zone);
    ep.capacities.push_back(s.capacity);
  }
  ep.grid = normalize_inputs(panel.sites, T, eps);

  ep.actual_ratio.resize(M * T, N);
  ep.forecast_ratio.resize(M * T, N);
  long clamps = 0;
  auto to_ratio = [&clamps](double mw, double capacity) {
    const double r = mw / capacity;
    if (r < 0.0 || r > 1.0) {
      ++clamps;
      return std::clamp(r, 0.0, 1.0);
    }
    return r;
  };
  for (int m = 0; m < M; ++m) {
    const double cap = panel.sites[m].capacity;
    for (int n = 0; n < N; ++n) {
      for (int t = 0; t < T; ++t) {
        const int row = m * T + t;
        ep.actual_ratio(row, n) = to_ratio(panel.actual(row, n), cap);
        ep.forecast_ratio(row, n) = to_ratio(panel.forecast(row, n), cap);
      }
    }
  }
  ep.clamp_count = clamps;
  if (clamps > 0) spdlog::info("clamped {} power ratios into [0,1]", clamps);

  const Eigen::MatrixXd raw_error = ep.actual_ratio - ep.forecast_ratio;
  const auto train = ep.training_days();
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSlice, "every day is held out for testing");

  ep.site_means.resize(M);
  ep.y.resize(M * T, N);
  for (int m = 0; m < M; ++m) {
    double sum = 0.0;
    for (int n : train) sum += raw_error.block(m * T, n, T, 1).sum();
    const double mean = sum / (static_cast<double>(train.size()) * T);
    ep.site_means(m) = mean;
    ep.y.middleRows(m * T, T) = raw_error.middleRows(m * T, T).array() - mean;
  }
  return ep;
}

VariogramCloud spatial_variogram(const ErrorPanel& ep) {
  const int M = ep.num_sites();
  const int T = ep.hours;
  const double cells = static_cast<double>(T) * ep.num_days();
  VariogramCloud cloud;
  cloud.reserve(static_cast<std::size_t>(M) * (M - 1) / 2);
  for (int a = 0; a < M; ++a) {
    for (int b = a + 1; b < M; ++b) {
      const double d = (ep.grid.spatial.row(a) - ep.grid.spatial.row(b)).norm();
      const double v = (ep.y.middleRows(a * T, T) - ep.y.middleRows(b * T, T)).squaredNorm() / cells;
      cloud.push_back({d, v, ep.site_ids[a], ep.site_ids[b]});
    }
  }
  return cloud;
}

VariogramCloud temporal_variogram(const ErrorPanel& ep) {
  const int M = ep.num_sites();
  const int T = ep.hours;
  const double cells = static_cast<double>(M) * ep.num_days();
  VariogramCloud cloud;
  cloud.reserve(static_cast<std::size_t>(T) * (T - 1) / 2);
  for (int a = 0; a < T; ++a) {
    for (int b = a + 1; b < T; ++b) {
      double sum = 0.0;
      for (int m = 0; m < M; ++m) sum += (ep.y.row(m * T + a) - ep.y.row(m * T + b)).squaredNorm();
      cloud.push_back({std::abs(ep.grid.temporal(a) - ep.grid.temporal(b)), sum / cells, std::to_string(a),
                       std::to_string(b)});
    }
  }
  return cloud;
}

std::vector<AcfRow> regional_acf(const ErrorPanel& ep, int max_lag,
                                 const std::map<std::string, std::string>& grouping) {
  const int T = ep.hours;
  const int N = ep.num_days();
  if (max_lag < 0 || max_lag >= T) throw Error(ErrorCode::InvalidRange, "max_lag must lie in [0, T)");

  std::map<std::string, std::vector<int>> regions;
  for (int m = 0; m < ep.num_sites(); ++m) {
    std::string region = "all";
    if (auto it = grouping.find(ep.site_ids[m]); it != grouping.end()) {
      region = it->second;
    } else if (grouping.empty() && !ep.zones[m].empty()) {
      region = ep.zones[m];
    }
    regions[region].push_back(m);
  }

  std::vector<AcfRow> out;
  for (const auto& [region, members] : regions) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(max_lag + 1);
    int counted = 0;
    for (int m : members) {
      const Eigen::MatrixXd block = ep.y.middleRows(m * T, T);  // T x N
      const Eigen::MatrixXd centered = block.array() - block.mean();
      const double denom = centered.squaredNorm();
      if (denom <= 0.0) continue;
      for (int lag = 0; lag <= max_lag; ++lag) {
        double num = 0.0;
        for (int n = 0; n < N; ++n)
          for (int t = 0; t + lag < T; ++t) num += centered(t, n) * centered(t + lag, n);
        acc(lag) += num / denom;
      }
      ++counted;
    }
    for (int lag = 0; lag <= max_lag; ++lag) {
      const double value = lag == 0 ? 1.0 : (counted > 0 ? acc(lag) / counted : 0.0);
      out.push_back({region, lag, value});
    }
  }
  return out;
}

}  // namespace wgp
