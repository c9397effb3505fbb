#pragma once

// Entry points behind the adaptive-alloc subcommands.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adaptive_alloc/experiment_io.hpp"
#include "adaptive_alloc/sim_harness.hpp"

namespace adaptive_alloc {

/// Beta tables backed by JSON files in `dir`. The (T-1)-stage table is
/// loaded or built before the T-stage one. With `force` every table is
/// recalibrated once per provider. Cache files in use are appended to
/// `touched`.
CalibrationProvider cached_calibration(const ExperimentConfig& cfg,
                                       const std::filesystem::path& dir, bool force,
                                       std::vector<std::string>* touched = nullptr,
                                       std::ostream* log = nullptr);

struct CalibrateOptions {
  std::filesystem::path config;
  bool force = false;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<int> workers;
};

/// Builds every beta table the config's OLFC policies need. Returns the
/// cache files in use.
std::vector<std::string> cmd_calibrate(const CalibrateOptions& opt, std::ostream& log);

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::filesystem::path> cache_dir;
};

/// Writes trials.csv, summary.csv and manifest.json into out_dir.
RunManifest cmd_run(const RunOptions& opt, std::ostream& log);

/// Renders summary.csv from a results directory.
void cmd_report(const std::filesystem::path& dir, ReportFormat format, std::ostream& out);

}  // namespace adaptive_alloc
