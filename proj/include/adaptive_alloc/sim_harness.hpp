#pragma once

// Monte Carlo comparison of allocation policies over a (B, p0) grid.
//
// Every trial draws ground truth and observation noise from counter-based
// streams keyed by the trial index, so all policies, budgets and priors see
// common random numbers and the output does not depend on the worker count.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adaptive_alloc/baselines.hpp"
#include "adaptive_alloc/core_model.hpp"
#include "adaptive_alloc/olfc.hpp"
#include "adaptive_alloc/single_stage.hpp"

namespace adaptive_alloc {

struct PolicySpec {
  enum class Kind { NA, OLFC, DS, DSB, ST, STB };
  Kind kind = Kind::NA;
  int stages = 1;  ///< OLFC only

  /// Parses "NA", "OLFC-<T>", "DS", "DSB", "ST", "STB".
  static PolicySpec parse(const std::string& text);
  std::string id() const;
  bool is_culling() const;
  bool is_bayesian() const { return kind == Kind::DSB || kind == Kind::STB; }
};

struct ExperimentConfig {
  std::size_t n = 1000;
  /// Stage counts tried for DS/ST-style policies; the best one per cell is kept.
  std::vector<int> T_list{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  /// rho values tried for ST-style policies.
  std::vector<double> rho_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  /// rho of the DS-style sign threshold.
  double ds_rho = 0.5;
  CullStatistic bayesian_cull = CullStatistic::Posterior;
  std::vector<double> B_grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> p0_grid{0.5};
  /// Template prior; p0 is overridden per cell.
  TestPrior prior{0.5, 0.0, 1.0, 0.0, 1.0 / 16.0};
  double nu2 = 1.0;
  double c = 1.0;
  int trials = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> policies{"NA", "OLFC-2"};
  LagrangianSolverConfig solver;
  CalibrationConfig calibration;
  int workers = 1;

  void validate() const;
  std::vector<PolicySpec> policy_specs() const;
  BeliefState prior_state(double B, double p0) const;
};

struct TrialRecord {
  std::string policy;
  double B = 0.0;
  double p0 = 0.0;
  int trial = 0;
  int errors = 0;
  int type1 = 0;  ///< declared 1, truth 0
  int type2 = 0;  ///< declared 0, truth 1
  double spent = 0.0;
  /// type1 + c * type2.
  double weighted_risk = 0.0;
  double wall_time = 0.0;  ///< seconds; not part of any deterministic output
};

/// Parameters picked for a culling policy in one cell.
struct Selection {
  std::string policy;
  double B = 0.0;
  double p0 = 0.0;
  int stages = 0;
  double rho = 0.0;
  double mean_errors = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<Selection> selections;
};

/// Supplies the beta table of a T-stage OLFC policy for one cell.
using CalibrationProvider = std::function<BetaTable(int stages, double B, double p0)>;

/// Calibration settings for one cell: the Monte Carlo seed is derived from
/// (calibration seed, T, B, p0) and the trial-level worker count is used.
CalibrationConfig calibration_for(const ExperimentConfig& cfg, int stages, double B, double p0);

/// Calibrates in memory, reusing the (T-1)-stage table for T.
CalibrationProvider in_memory_calibration(const ExperimentConfig& cfg);

/// Records are ordered by policy (config order), p0, B, then trial.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const CalibrationProvider& provider);

/// Scores decisions against the truth.
TrialRecord score_trial(const std::vector<int>& decisions, const std::vector<int>& truth,
                        double c);

struct SweepRow {
  std::string policy;
  double B = 0.0;
  double p0 = 0.0;
  double mean_errors = 0.0;
  double std_err = 0.0;  ///< sample standard deviation / sqrt(trials)
  int trials = 0;
};

/// One row per (policy, B, p0) in order of first appearance.
std::vector<SweepRow> summarize(const std::vector<TrialRecord>& records);

}  // namespace adaptive_alloc
