#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace wgp {

struct SiteRecord {
  std::string site_id;
  double longitude = 0.0;
  double latitude = 0.0;
  std::string zone;  // empty when absent
  double capacity = 0.0;  // MW
};

// Dense site/day/hour panel. Values are stored with one column per day and
// rows ordered site-major, hour-minor: row = m * T + t.
struct SitePanel {
  std::vector<SiteRecord> sites;
  std::vector<std::string> days;
  int hours = 24;
  Eigen::MatrixXd actual;    // MW
  Eigen::MatrixXd forecast;  // MW

  int num_sites() const { return static_cast<int>(sites.size()); }
  int num_days() const { return static_cast<int>(days.size()); }
  double actual_at(int m, int t, int n) const { return actual(m * hours + t, n); }
  double forecast_at(int m, int t, int n) const { return forecast(m * hours + t, n); }
};

struct InputPoint {
  Eigen::Vector2d s;
  double t = 0.0;
};

struct InputGrid {
  Eigen::MatrixX2d spatial;   // M x 2, inside (0,1)
  Eigen::VectorXd temporal;   // T, inside (0,1)
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();  // per-dimension minimum of raw coordinates
  double scale = 1.0;         // raw units per normalized unit, shared by both axes
  double epsilon_margin = 0.05;

  int num_sites() const { return static_cast<int>(spatial.rows()); }
  int num_hours() const { return static_cast<int>(temporal.size()); }
  InputPoint point(int site, int hour) const {
    return InputPoint{spatial.row(site).transpose(), temporal(hour)};
  }
  // Maps a raw (longitude, latitude) pair through the same affine transform.
  Eigen::Vector2d normalize(double longitude, double latitude) const;
};

struct SplitSpec {
  std::set<std::string> test_site_ids;
  std::set<std::string> test_day_ids;
  std::uint64_t rng_seed = 0;
};

struct ErrorPanel {
  std::vector<std::string> site_ids;
  std::vector<std::string> zones;
  std::vector<double> capacities;
  std::vector<std::string> days;
  int hours = 24;
  Eigen::MatrixXd y;              // (M*T) x N centered errors
  Eigen::VectorXd site_means;     // M
  Eigen::MatrixXd forecast_ratio; // (M*T) x N, empty for synthetic panels
  Eigen::MatrixXd actual_ratio;   // (M*T) x N, empty for synthetic panels
  InputGrid grid;
  SplitSpec split;
  long clamp_count = 0;

  int num_sites() const { return static_cast<int>(site_ids.size()); }
  int num_days() const { return static_cast<int>(days.size()); }
  double at(int m, int t, int n) const { return y(m * hours + t, n); }

  std::vector<int> training_days() const;
  std::vector<int> test_days() const;
  // Sites not held out; these are observed on test days.
  std::vector<int> training_sites() const;
  std::vector<int> test_sites() const;
  // Training slice: all sites, training days only. Columns are day vectors.
  Eigen::MatrixXd training_matrix() const;
  int site_index(const std::string& id) const;
  int day_index(const std::string& id) const;
};

struct VariogramPair {
  double d = 0.0;
  double v = 0.0;
  std::string id_a;
  std::string id_b;
};
using VariogramCloud = std::vector<VariogramPair>;

struct AcfRow {
  std::string region;
  int lag = 0;
  double acf = 0.0;
};

// Parses the panel CSV (header required):
// site_id,longitude,latitude,zone,capacity_mw,day,hour,actual_mw,forecast_mw
SitePanel ingest_panel(std::istream& csv, int hours = 24);

// Drops the named sites from a panel.
SitePanel exclude_sites(const SitePanel& panel, const std::set<std::string>& excluded);

// Draws test sites and days without replacement from a seeded generator.
SplitSpec make_split(const std::vector<std::string>& site_ids, const std::vector<std::string>& day_ids,
                     int n_test_sites, int n_test_days, std::uint64_t seed);

InputGrid normalize_inputs(const std::vector<SiteRecord>& sites, int hours, double eps = 0.05);

ErrorPanel compute_error_panel(const SitePanel& panel, const SplitSpec& split, double eps = 0.05);

VariogramCloud spatial_variogram(const ErrorPanel& ep);
VariogramCloud temporal_variogram(const ErrorPanel& ep);

// Empty `grouping` puts every site in region "all".
std::vector<AcfRow> regional_acf(const ErrorPanel& ep, int max_lag,
                                 const std::map<std::string, std::string>& grouping = {});

}  // namespace wgp
