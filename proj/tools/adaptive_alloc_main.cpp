#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adaptive_alloc/commands.hpp"

using namespace adaptive_alloc;

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained adaptive resource allocation for parallel hypothesis tests"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CalibrateOptions cal;
  std::string cal_config;
  int cal_workers = 0;
  auto* calibrate = app.add_subcommand("calibrate", "Build or refresh the beta-table cache");
  calibrate->add_option("--config", cal_config, "Experiment config (JSON)")->required();
  calibrate->add_flag("--force", cal.force, "Recalibrate even when cached tables exist");
  calibrate->add_option("--workers", cal_workers, "Worker threads")->check(CLI::PositiveNumber);

  RunOptions run;
  std::string run_config;
  std::string run_out;
  int run_workers = 0;
  std::uint64_t run_seed = 0;
  int run_trials = 0;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment grid and write results");
  run_cmd->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  auto* w_opt =
      run_cmd->add_option("--workers", run_workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* s_opt = run_cmd->add_option("--seed", run_seed, "Override the config seed");
  auto* t_opt =
      run_cmd->add_option("--trials", run_trials, "Override the trial count")->check(CLI::PositiveNumber);

  std::string report_dir;
  ReportFormat format = ReportFormat::Table;
  const std::map<std::string, ReportFormat> formats{{"table", ReportFormat::Table},
                                                    {"csv", ReportFormat::Csv}};
  auto* report = app.add_subcommand("report", "Print a comparison table from a results directory");
  report->add_option("dir", report_dir, "Results directory")->required();
  report->add_option("--format", format, "table or csv")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*calibrate) {
      cal.config = cal_config;
      if (cal_workers > 0) cal.workers = cal_workers;
      for (const auto& f : cmd_calibrate(cal, std::cerr)) std::cout << f << '\n';
    } else if (*run_cmd) {
      run.config = run_config;
      run.out_dir = run_out;
      if (*w_opt) run.workers = run_workers;
      if (*s_opt) run.seed = run_seed;
      if (*t_opt) run.trials = run_trials;
      const RunManifest m = cmd_run(run, std::cerr);
      for (const auto& f : m.outputs) std::cout << f << '\n';
    } else if (*report) {
      cmd_report(report_dir, format, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "adaptive-alloc: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
