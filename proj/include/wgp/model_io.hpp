#pragma once

#include "wgp/fit.hpp"
#include "wgp/panel.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace wgp {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kBundleSchemaVersion = 1;

// Shortest-safe decimal text: 17 significant digits, so parsing returns the
// identical double.
std::string format_exact(double value);
double parse_exact(const nlohmann::json& field);

nlohmann::json to_json(const WarpStack& stack);
WarpStack warp_stack_from_json(const nlohmann::json& j, int dim);

nlohmann::json to_json(const InputGrid& grid);
InputGrid input_grid_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

// Panel bundle: `panel.json` (metadata, grid, split, site means) plus
// `cells.csv` (site_id,day,hour,y,forecast_ratio,actual_ratio).
void save_bundle(const ErrorPanel& panel, const std::filesystem::path& dir);
ErrorPanel load_bundle(const std::filesystem::path& dir);

// Writes text to a file, throwing Io on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace wgp
