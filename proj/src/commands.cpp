#include "adaptive_alloc/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace adaptive_alloc {

namespace fs = std::filesystem;

CalibrationProvider cached_calibration(const ExperimentConfig& cfg, const fs::path& dir,
                                       bool force, std::vector<std::string>* touched,
                                       std::ostream* log) {
  struct State {
    std::mutex mutex;
    std::map<std::tuple<int, double, double>, BetaTable> tables;
  };
  auto state = std::make_shared<State>();
  return [cfg, dir, force, touched, log, state](int stages, double B, double p0) -> BetaTable {
    std::lock_guard lock(state->mutex);
    BetaTable table;
    for (int t = 1; t <= stages; ++t) {
      const auto memo = std::make_tuple(t, B, p0);
      if (auto it = state->tables.find(memo); it != state->tables.end()) {
        table = it->second;
        continue;
      }
      const CalibrationKey key = CalibrationKey::make(cfg, t, B, p0);
      const fs::path path = dir / key.file_name();
      std::optional<CachedCalibration> entry;
      if (!force) entry = read_calibration(path, key);
      if (entry) {
        if (entry->table.stages != t || (t > 1 && !std::equal(table.beta.begin(),
                                                              table.beta.end(),
                                                              entry->table.beta.begin() + 1)))
          entry.reset();
      }
      if (!entry) {
        CachedCalibration fresh{key, {}, 0.0};
        if (t == 1) {
          fresh.table = BetaTable::single_stage();
          fresh.u0 = B;
        } else {
          if (log)
            *log << "calibrating T=" << t << " B=" << format_double(B)
                 << " p0=" << format_double(p0) << '\n';
          LagrangianSolverConfig solver = cfg.solver;
          solver.workers = 1;
          const CalibrationResult res = calibrate_beta0(cfg.prior_state(B, p0), t, table, cfg.c,
                                                        calibration_for(cfg, t, B, p0), solver);
          fresh.table = res.table;
          fresh.u0 = res.u0;
        }
        write_calibration(path, fresh);
        entry = fresh;
      }
      table = entry->table;
      state->tables.emplace(memo, table);
      if (touched && std::find(touched->begin(), touched->end(), path.string()) == touched->end())
        touched->push_back(path.string());
    }
    return table;
  };
}

namespace {

void apply_workers(ExperimentConfig& cfg, std::optional<int> workers) {
  if (!workers) return;
  if (*workers < 1) throw std::invalid_argument("--workers must be >= 1");
  cfg.workers = *workers;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

std::vector<std::string> cmd_calibrate(const CalibrateOptions& opt, std::ostream& log) {
  ExperimentConfig cfg = load_config(opt.config);
  apply_workers(cfg, opt.workers);
  cfg.validate();
  const fs::path dir = opt.cache_dir.value_or(default_cache_dir());
  std::vector<std::string> files;
  auto provider = cached_calibration(cfg, dir, opt.force, &files, &log);
  for (const auto& spec : cfg.policy_specs()) {
    if (spec.kind != PolicySpec::Kind::OLFC) continue;
    for (double p0 : cfg.p0_grid)
      for (double B : cfg.B_grid) provider(spec.stages, B, p0);
  }
  return files;
}

RunManifest cmd_run(const RunOptions& opt, std::ostream& log) {
  ExperimentConfig cfg = load_config(opt.config);
  apply_workers(cfg, opt.workers);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.trials) cfg.trials = *opt.trials;
  cfg.validate();

  RunManifest manifest;
  manifest.started_at = utc_timestamp();
  manifest.config = config_to_json(cfg);
  manifest.config_hash = config_hash(cfg);
  manifest.seed = cfg.seed;

  const fs::path dir = opt.cache_dir.value_or(default_cache_dir());
  auto provider = cached_calibration(cfg, dir, false, &manifest.calibration_files, &log);
  const ExperimentResult result = run_experiment(cfg, provider);
  const std::vector<SweepRow> rows = summarize(result.records);
  manifest.selections = result.selections;

  fs::create_directories(opt.out_dir);
  const fs::path trials = opt.out_dir / "trials.csv";
  const fs::path summary = opt.out_dir / "summary.csv";
  const fs::path manifest_path = opt.out_dir / "manifest.json";
  {
    std::ostringstream os;
    write_trials_csv(os, result.records);
    write_file(trials, os.str());
  }
  {
    std::ostringstream os;
    write_summary_csv(os, rows);
    write_file(summary, os.str());
  }
  manifest.outputs = {trials.string(), summary.string(), manifest_path.string()};
  manifest.finished_at = utc_timestamp();
  write_file(manifest_path, manifest.to_json().dump(2) + "\n");
  return manifest;
}

void cmd_report(const fs::path& dir, ReportFormat format, std::ostream& out) {
  const fs::path summary = dir / "summary.csv";
  std::ifstream in(summary, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + summary.string() + "'");
  out << render_report(read_summary_csv(in), format);
}

}  // namespace adaptive_alloc
