#pragma once

// Single-stage budget allocation
//
//   minimize  sum_i R_i(u_i)   s.t.  sum_i u_i = U,  u_i >= 0,
//
// with non-convex, decreasing R_i. The equality constraint is priced by a
// multiplier lambda >= 0 so the problem splits into n one-dimensional
// minimizations of R_i(u) + lambda u. An outer bisection on lambda drives the
// total demand S(lambda) to U. Any lambda whose minimizers are feasible gives
// a global optimum (the result is then `certified`). S(lambda) may jump over
// U when a component has two separated minimizers; the last iterate is then
// rescaled onto the budget and flagged `rescaled`.
//
// Each component minimizer is monotone non-increasing in lambda, so bounds
// lower_i <= u_i <= upper_i are tightened as the bracket shrinks, and
// u_i < R_i(0) / lambda caps every search interval.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adaptive_alloc/bayes_risk.hpp"
#include "adaptive_alloc/core_model.hpp"

namespace adaptive_alloc {

struct LagrangianSolverConfig {
  int grid_points = 200;
  int refine_iters = 60;
  /// Certification threshold on |S(lambda) - U| / U.
  double lambda_tol = 1e-6;
  int max_bisect = 100;
  /// Bisection also stops once the lambda bracket is narrower than this
  /// fraction of its upper end.
  double bracket_rtol = 1e-10;
  /// Smallest positive resource on the search grid; 0 selects 1e-8 * U / n.
  double u_floor = 0.0;
  /// Threads used for the per-test minimizations.
  int workers = 1;
  /// Keep per-iteration allocations and bounds in the trace.
  bool record_trace = false;

  void validate() const;
};

struct BisectionStep {
  double lambda = 0.0;
  double demand = 0.0;  ///< S(lambda)
  /// Filled only with record_trace: u_i(lambda) and the bounds in force when
  /// they were computed.
  std::vector<double> u;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct AllocationResult {
  Allocation allocation;
  double lambda = 0.0;
  double objective = 0.0;
  bool certified = false;
  bool rescaled = false;
  std::vector<BisectionStep> trace;
  /// u_i(lambda) of the selected iterate before it was scaled onto U.
  std::vector<double> raw;
};

struct InnerSearchOptions {
  int grid_points = 200;
  int refine_iters = 60;
  /// Smallest positive grid point (log grids cannot contain 0).
  double u_floor = 1e-10;
};

struct InnerMinimum {
  double u = 0.0;
  double value = 0.0;  ///< R(u) + lambda u
};

/// Global minimizer of risk(u) + lambda u over [lo, min(hi, risk(0)/lambda)].
/// `risk` must accept u = 0. Exhaustive log-grid scan followed by local
/// refinement of every grid-local minimum; the smallest u wins ties.
InnerMinimum lagrangian_min(const std::function<double(double)>& risk, double lambda,
                            double lo, double hi, const InnerSearchOptions& opts = {});

/// S(lambda): sum with Kahan compensation.
double allocation_sum(std::span<const double> u);

/// Solve the single-stage problem for the remaining budget of `state`.
AllocationResult solve_single_stage(const BeliefState& state, double c,
                                    const LagrangianSolverConfig& cfg = {});

/// sum_i R_i(u_i) for an explicit allocation.
double total_risk(const BeliefState& state, const Allocation& alloc, double c);

}  // namespace adaptive_alloc
