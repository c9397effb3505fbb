#pragma once

// Multistage allocation by open-loop feedback control.
//
// At stage t the remaining horizon is planned open-loop. The planned totals
// v_i(t) = sum_{tau >= t} u_i(tau) solve an ordinary single-stage problem on
// the current belief state with budget U(t), and only the fraction
// beta(t; T) of that plan is spent now. The last stage always spends
// everything (beta = 1). A T-stage table reuses the (T-1)-stage multipliers
// shifted by one stage; the first-stage multiplier is calibrated offline by
// Monte Carlo.

#include <cstdint>
#include <vector>

#include "adaptive_alloc/core_model.hpp"
#include "adaptive_alloc/policy.hpp"
#include "adaptive_alloc/sensing.hpp"
#include "adaptive_alloc/single_stage.hpp"

namespace adaptive_alloc {

struct BetaTable {
  int stages = 1;
  std::vector<double> beta{1.0};

  static BetaTable single_stage() { return {}; }
  /// T-stage table from the (T-1)-stage one: beta(t; T) = beta(t-1; T-1)
  /// for t >= 1, with beta(0; T) supplied.
  static BetaTable extend(const BetaTable& previous, double beta0);

  double at(int stage) const { return beta.at(static_cast<std::size_t>(stage)); }
  void validate() const;

  friend bool operator==(const BetaTable&, const BetaTable&) = default;
};

struct OlfcPlan {
  std::vector<double> v_star;
  Allocation u_now;
  double objective = 0.0;  ///< sum_i R_i(v_i; xi_i(t))
  bool certified = false;
  bool rescaled = false;
};

struct CalibrationConfig {
  /// Monte Carlo instances averaged per beta value.
  int mc_samples = 500;
  /// Probe points on [0, 1] before golden-section refinement.
  int beta_grid = 21;
  /// Replicate futures simulated per instance after the first stage.
  int inner_reps = 1;
  int golden_iters = 12;
  std::uint64_t seed = 0x5eed;
  /// Tests per Monte Carlo instance for homogeneous priors (0 keeps the
  /// instance's own n). The budget is scaled to keep B fixed.
  int calibration_n = 0;
  int workers = 1;

  void validate() const;
};

struct BetaProbe {
  double beta = 0.0;
  double cost = 0.0;  ///< mean Bayes risk per test
};

struct CalibrationResult {
  BetaTable table;
  double beta0 = 1.0;
  /// Mean first-stage allocation per test, beta0 * mean(v*(0)).
  double u0 = 0.0;
  double cost = 0.0;
  std::vector<BetaProbe> probes;
};

/// Lumped remaining-horizon plan v*(t).
AllocationResult olfc_reduce(const BeliefState& state, double c,
                             const LagrangianSolverConfig& cfg = {});

OlfcPlan plan_stage(const BeliefState& state, double beta_t, double c,
                    const LagrangianSolverConfig& cfg = {});

/// Calibrate beta(0; T) for the prior state; T = 1 returns the trivial table.
CalibrationResult calibrate_beta0(const BeliefState& prior_state, int stages,
                                  const BetaTable& previous, double c,
                                  const CalibrationConfig& cal,
                                  const LagrangianSolverConfig& cfg = {});

/// Expected Bayes-risk sum of following the table from `state` (at stage
/// state.stage of a `table.stages`-stage policy) onward. The final stage is
/// scored in closed form; earlier stages draw observations from `sensor`.
double olfc_cost_to_go(const BeliefState& state, const BetaTable& table, double c,
                       const LagrangianSolverConfig& cfg, ObservationSource& sensor);

/// Execute a T-stage OLFC policy and decide every test by MAP.
PolicyOutcome run_olfc(const BeliefState& prior_state, const BetaTable& table, double c,
                       const LagrangianSolverConfig& cfg, ObservationSource& sensor);

}  // namespace adaptive_alloc
