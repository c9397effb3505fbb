#pragma once

// File formats: JSON experiment configs, calibration cache entries, result
// CSVs and the run manifest. Every file carries a schema version and readers
// reject versions they do not know.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptive_alloc/olfc.hpp"
#include "adaptive_alloc/sim_harness.hpp"

namespace adaptive_alloc {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);
/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Everything a cached beta table depends on.
struct CalibrationKey {
  TestPrior prior;  ///< p0 set to the cell's value
  int stages = 1;
  double B = 0.0;
  double c = 1.0;
  double nu2 = 1.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int mc_samples = 0;
  int calibration_n = 0;
  int beta_grid = 0;
  int golden_iters = 0;
  int inner_reps = 0;

  static CalibrationKey make(const ExperimentConfig& cfg, int stages, double B, double p0);
  /// Stable file name derived from the key.
  std::string file_name() const;
  nlohmann::json to_json() const;
};

struct CachedCalibration {
  CalibrationKey key;
  BetaTable table;
  double u0 = 0.0;
};

nlohmann::json calibration_to_json(const CachedCalibration& entry);
CachedCalibration calibration_from_json(const nlohmann::json& j);
void write_calibration(const std::filesystem::path& path, const CachedCalibration& entry);
/// Empty when the file is missing or was written for a different key.
std::optional<CachedCalibration> read_calibration(const std::filesystem::path& path,
                                                  const CalibrationKey& expected);

/// ADAPTIVE_ALLOC_CACHE if set, else $XDG_CACHE_HOME/adaptive-alloc, else
/// ~/.cache/adaptive-alloc, else ./.adaptive-alloc-cache.
std::filesystem::path default_cache_dir();

void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_trials_csv(std::istream& is);
void write_summary_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_summary_csv(std::istream& is);

struct RunManifest {
  std::string config_hash;
  nlohmann::json config;
  std::uint64_t seed = 0;
  int schema_version = kSchemaVersion;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
  std::vector<std::string> calibration_files;
  std::vector<Selection> selections;

  nlohmann::json to_json() const;
};

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

enum class ReportFormat { Table, Csv };

/// Per-p0 comparison of mean errors by policy and B, marking the best policy
/// in each cell, followed by OLFC-vs-NA improvement factors.
std::string render_report(const std::vector<SweepRow>& rows, ReportFormat format);

/// NA mean over OLFC mean. Equal means give 1; a zero OLFC mean is replaced
/// by 0.5 errors and the factor is then a lower bound.
struct Improvement {
  double factor = 1.0;
  bool lower_bound = false;
};
Improvement improvement_factor(double na_mean, double olfc_mean);

}  // namespace adaptive_alloc
