#include "adaptive_alloc/olfc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adaptive_alloc/parallel.hpp"

namespace adaptive_alloc {

BetaTable BetaTable::extend(const BetaTable& previous, double beta0) {
  previous.validate();
  if (!(beta0 >= 0.0 && beta0 <= 1.0))
    throw std::invalid_argument("BetaTable: beta must lie in [0, 1]");
  BetaTable t;
  t.stages = previous.stages + 1;
  t.beta.clear();
  t.beta.push_back(beta0);
  t.beta.insert(t.beta.end(), previous.beta.begin(), previous.beta.end());
  return t;
}

void BetaTable::validate() const {
  if (stages < 1 || beta.size() != static_cast<std::size_t>(stages))
    throw std::invalid_argument("BetaTable: size does not match the number of stages");
  for (double b : beta)
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("BetaTable: beta outside [0, 1]");
  if (beta.back() != 1.0) throw std::invalid_argument("BetaTable: last-stage beta must be 1");
}

void CalibrationConfig::validate() const {
  if (mc_samples <= 0) throw std::invalid_argument("CalibrationConfig: mc_samples must be positive");
  if (beta_grid < 2) throw std::invalid_argument("CalibrationConfig: beta_grid must be >= 2");
  if (inner_reps <= 0 || golden_iters < 0 || workers <= 0 || calibration_n < 0)
    throw std::invalid_argument("CalibrationConfig: invalid counts");
}

AllocationResult olfc_reduce(const BeliefState& state, double c,
                             const LagrangianSolverConfig& cfg) {
  return solve_single_stage(state, c, cfg);
}

OlfcPlan plan_stage(const BeliefState& state, double beta_t, double c,
                    const LagrangianSolverConfig& cfg) {
  if (!(beta_t >= 0.0 && beta_t <= 1.0))
    throw std::invalid_argument("plan_stage: beta must lie in [0, 1]");
  OlfcPlan plan;
  if (state.remaining_budget <= 0.0) {
    // Budget exhausted: nothing left to plan.
    plan.v_star.assign(state.size(), 0.0);
    plan.u_now = Allocation::zeros(state.size());
    plan.objective = total_risk(state, plan.u_now, c);
    plan.certified = true;
    return plan;
  }
  const AllocationResult res = olfc_reduce(state, c, cfg);
  plan.v_star = res.allocation.u;
  plan.objective = res.objective;
  plan.certified = res.certified;
  plan.rescaled = res.rescaled;
  std::vector<double> now(plan.v_star.size());
  std::transform(plan.v_star.begin(), plan.v_star.end(), now.begin(),
                 [&](double v) { return beta_t * v; });
  plan.u_now = Allocation(std::move(now));
  return plan;
}

namespace {

StageRecord make_record(const BeliefState& state, const OlfcPlan& plan) {
  StageRecord rec;
  rec.stage = state.stage;
  rec.budget_before = state.remaining_budget;
  rec.spent = plan.u_now.total();
  rec.active = static_cast<std::size_t>(
      std::count_if(plan.u_now.u.begin(), plan.u_now.u.end(), [](double u) { return u > 0.0; }));
  rec.certified = plan.certified;
  rec.rescaled = plan.rescaled;
  rec.allocation = plan.u_now;
  return rec;
}

}  // namespace

double olfc_cost_to_go(const BeliefState& start, const BetaTable& table, double c,
                       const LagrangianSolverConfig& cfg, ObservationSource& sensor) {
  table.validate();
  BeliefState state = start;
  for (int t = state.stage; t < table.stages; ++t) {
    const OlfcPlan plan = plan_stage(state, table.at(t), c, cfg);
    if (t == table.stages - 1) return plan.objective;
    state = posterior_update(state, plan.u_now, sensor.observe(t, plan.u_now));
  }
  return total_risk(state, Allocation::zeros(state.size()), c);
}

PolicyOutcome run_olfc(const BeliefState& prior_state, const BetaTable& table, double c,
                       const LagrangianSolverConfig& cfg, ObservationSource& sensor) {
  table.validate();
  prior_state.validate();
  PolicyOutcome out;
  BeliefState state = prior_state;
  for (int t = 0; t < table.stages; ++t) {
    const OlfcPlan plan = plan_stage(state, table.at(t), c, cfg);
    out.trace.push_back(make_record(state, plan));
    out.spent += plan.u_now.total();
    state = posterior_update(state, plan.u_now, sensor.observe(t, plan.u_now));
    out.decision_stages.push_back(t);
  }
  out.decisions = map_decide_all(state, c);
  return out;
}

CalibrationResult calibrate_beta0(const BeliefState& prior_state, int stages,
                                  const BetaTable& previous, double c,
                                  const CalibrationConfig& cal,
                                  const LagrangianSolverConfig& cfg) {
  prior_state.validate();
  if (stages < 1) throw std::invalid_argument("calibrate_beta0: stages must be >= 1");
  if (prior_state.size() == 0 || !(prior_state.remaining_budget > 0.0))
    throw std::invalid_argument("calibrate_beta0: empty instance or zero budget");

  CalibrationResult result;
  const double n_full = static_cast<double>(prior_state.size());
  if (stages == 1) {
    result.table = BetaTable::single_stage();
    result.u0 = prior_state.remaining_budget / n_full;
    return result;
  }
  cal.validate();
  if (previous.stages != stages - 1)
    throw std::invalid_argument("calibrate_beta0: previous table must have T - 1 stages");
  previous.validate();

  BeliefState proxy = prior_state;
  if (cal.calibration_n > 0 && static_cast<std::size_t>(cal.calibration_n) < prior_state.size() &&
      prior_state.is_homogeneous()) {
    const auto m = static_cast<std::size_t>(cal.calibration_n);
    proxy.tests.resize(m);
    proxy.remaining_budget = prior_state.remaining_budget * static_cast<double>(m) / n_full;
  }
  const std::size_t n = proxy.size();
  const std::vector<double> v0 = olfc_reduce(proxy, c, cfg).allocation.u;
  const double mean_v0 = std::accumulate(v0.begin(), v0.end(), 0.0) / static_cast<double>(n);

  const CounterRng rng(cal.seed);
  const int reps = stages > 2 ? cal.inner_reps : 1;
  std::vector<GroundTruth> truths(static_cast<std::size_t>(cal.mc_samples));
  for (std::size_t s = 0; s < truths.size(); ++s) truths[s] = sample_truth(proxy.tests, rng, s);

  auto cost_at = [&](double beta) {
    const BetaTable table = BetaTable::extend(previous, beta);
    std::vector<double> u(v0.size());
    std::transform(v0.begin(), v0.end(), u.begin(), [&](double v) { return beta * v; });
    const Allocation first(std::move(u));
    std::vector<double> per_sample(truths.size(), 0.0);
    parallel_for(truths.size(), cal.workers, [&](std::size_t s) {
      SimulatedSensor sensor(truths[s].x, proxy.noise.nu2, rng, s);
      const BeliefState next = posterior_update(proxy, first, sensor.observe(0, first));
      double acc = 0.0;
      for (int r = 0; r < reps; ++r) {
        sensor.set_branch(static_cast<std::uint64_t>(r));
        acc += olfc_cost_to_go(next, table, c, cfg, sensor);
      }
      per_sample[s] = acc / reps;
    });
    double total = 0.0;
    for (double v : per_sample) total += v;
    return total / (static_cast<double>(truths.size()) * static_cast<double>(n));
  };

  std::vector<BetaProbe> grid;
  for (int k = 0; k < cal.beta_grid; ++k) {
    const double beta = static_cast<double>(k) / (cal.beta_grid - 1);
    grid.push_back({beta, cost_at(beta)});
  }
  result.probes = grid;
  std::size_t k_best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (grid[k].cost < grid[k_best].cost) k_best = k;
  BetaProbe best = grid[k_best];

  // Golden-section refinement inside the neighbouring grid cells.
  double a = grid[k_best > 0 ? k_best - 1 : 0].beta;
  double b = grid[std::min(k_best + 1, grid.size() - 1)].beta;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = cost_at(x1);
  double f2 = cost_at(x2);
  result.probes.push_back({x1, f1});
  result.probes.push_back({x2, f2});
  for (int it = 0; it < cal.golden_iters; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = cost_at(x1);
      result.probes.push_back({x1, f1});
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = cost_at(x2);
      result.probes.push_back({x2, f2});
    }
  }
  for (const auto& probe : result.probes)
    if (probe.cost < best.cost) best = probe;

  result.beta0 = best.beta;
  result.cost = best.cost;
  result.table = BetaTable::extend(previous, best.beta);
  result.u0 = best.beta * mean_v0;
  return result;
}

}  // namespace adaptive_alloc
