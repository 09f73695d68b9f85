#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "dbn/core.hpp"
#include "dbn/learn.hpp"

namespace dbn {

using Json = nlohmann::ordered_json;

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

// JSON -----------------------------------------------------------------------------------------

/// {"n_x","n_z","p","intra","inter","auto_lags","static_edges"}; matrices as 0/1 rows.
Json structure_to_json(const DbnStructure& s);
DbnStructure structure_from_json(const nlohmann::json& j);

Json params_to_json(const ParameterSet& params);
ParameterSet params_from_json(const nlohmann::json& j);

Json report_to_json(const LearnerReport& report);
/// Inverse of report_to_json.
LearnerReport report_from_json(const nlohmann::json& j);

// Datasets -------------------------------------------------------------------------------------

/// Long format: header "traj,t,x1..xn", one row per (trajectory, slice).
std::string dataset_csv(const TrajectoryDataset& data);
/// Header "traj,z1..zm", one row per trajectory; empty when n_z = 0.
std::string static_csv(const TrajectoryDataset& data);
/// {"domain": "discrete"|"continuous", "x_arities", "z_arities"}.
Json dataset_meta(const TrajectoryDataset& data);

/// Parses the CSV pair. Without metadata a dataset is continuous unless `meta` says otherwise.
TrajectoryDataset parse_dataset(const std::string& data_csv, const std::string& static_csv_text,
                                const nlohmann::json& meta);

/// Writes data.csv, meta.json, and static.csv (when n_z > 0) into `dir`.
void write_dataset(const std::filesystem::path& dir, const TrajectoryDataset& data);

/// Reads a dataset from a directory (data.csv, optional static.csv and meta.json) or from a single
/// data CSV path (siblings static.csv and meta.json are used when present).
TrajectoryDataset read_dataset(const std::filesystem::path& path);

// Files ----------------------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

/// FNV-1a 64-bit digest as 16 hex digits.
std::string content_hash(const std::string& content);

/// Parses JSON, raising a schema error that names the file, line, and column on failure.
nlohmann::json parse_json(const std::string& text, const std::string& source);

}  // namespace dbn
