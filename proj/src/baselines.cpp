#include "adaptive_alloc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adaptive_alloc/bayes_risk.hpp"

namespace adaptive_alloc {

void StageSchedule::validate() const {
  if (fractions.empty()) throw std::invalid_argument("StageSchedule: no stages");
  double sum = 0.0;
  for (double f : fractions) {
    if (!std::isfinite(f) || !(f > 0.0))
      throw std::invalid_argument("StageSchedule: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("StageSchedule: fractions must sum to 1");
}

StageSchedule StageSchedule::geometric(int stages) {
  if (stages < 1) throw std::invalid_argument("StageSchedule: stages must be >= 1");
  std::vector<double> f(static_cast<std::size_t>(stages));
  for (int t = 0; t < stages; ++t) f[static_cast<std::size_t>(t)] = std::ldexp(1.0, -t);
  const double sum = std::accumulate(f.begin(), f.end(), 0.0);
  for (double& x : f) x /= sum;
  return {f, false};
}

StageSchedule StageSchedule::equal(int stages) {
  if (stages < 1) throw std::invalid_argument("StageSchedule: stages must be >= 1");
  std::vector<double> f(static_cast<std::size_t>(stages), 1.0 / stages);
  f.back() = 1.0 - (1.0 / stages) * (stages - 1);
  return {f, true};
}

void ThresholdRule::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("ThresholdRule: rho must be in (0, 1]");
}

namespace {

StageRecord uniform_record(int stage, double budget_before, const Allocation& alloc,
                           std::size_t active) {
  StageRecord rec;
  rec.stage = stage;
  rec.budget_before = budget_before;
  rec.spent = alloc.total();
  rec.active = active;
  rec.certified = true;
  rec.allocation = alloc;
  return rec;
}

// Log of the stage likelihood ratio f1(y) / f0(y) under the pre-stage belief.
double stage_log_lr(const TestBelief& b, double nu2, double u, double y) {
  const double s0 = predictive_variance(b, nu2, 0, u);
  const double s1 = predictive_variance(b, nu2, 1, u);
  const double d0 = y - b.mu0;
  const double d1 = y - b.mu1;
  return 0.5 * (std::log(s0 / s1) + d0 * d0 / s0 - d1 * d1 / s1);
}

struct CullContext {
  const std::vector<TestBelief>* before;  // beliefs entering the stage
  const std::vector<TestBelief>* after;   // beliefs after the stage update
  const std::vector<TestBelief>* prior;
  const Allocation* alloc;
  const Observations* obs;
  double nu2;
};

double cull_statistic(const CullContext& ctx, CullStatistic stat, std::size_t i) {
  if (stat == CullStatistic::Posterior) return (*ctx.after)[i].p;
  return *(*ctx.obs)[i];
}

bool passes_threshold(const CullContext& ctx, CullStatistic stat, double rho, std::size_t i) {
  if (rho >= 1.0) return true;
  const double u = ctx.alloc->u[i];
  const double y = *(*ctx.obs)[i];
  if (stat == CullStatistic::Posterior)
    return stage_log_lr((*ctx.before)[i], ctx.nu2, u, y) > std::log((1.0 - rho) / rho);
  const TestBelief& b = (*ctx.prior)[i];
  const double sd0 = std::sqrt(predictive_variance(b, ctx.nu2, 0, u));
  return y > b.mu0 + sd0 * gaussian_quantile(1.0 - rho);
}

std::vector<std::size_t> cull(const std::vector<std::size_t>& active, const CullContext& ctx,
                              const CullingOptions& opt) {
  std::vector<std::size_t> kept;
  if (opt.rule.kind == ThresholdRule::Kind::SignThreshold) {
    for (std::size_t i : active)
      if (passes_threshold(ctx, opt.statistic, opt.rule.rho, i)) kept.push_back(i);
    return kept;
  }
  const auto m = active.size();
  const auto keep = std::min<std::size_t>(
      m, static_cast<std::size_t>(std::ceil(opt.rule.rho * static_cast<double>(m) - 1e-12)));
  kept = active;
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return cull_statistic(ctx, opt.statistic, a) > cull_statistic(ctx, opt.statistic, b);
  });
  kept.resize(keep);
  std::sort(kept.begin(), kept.end());
  return kept;
}

PolicyOutcome run_culling(const BeliefState& prior_state, const StageSchedule& schedule,
                          bool bayesian, double c, ObservationSource& sensor,
                          const CullingOptions& opt) {
  prior_state.validate();
  schedule.validate();
  opt.rule.validate();
  if (!(c > 0.0)) throw std::invalid_argument("baseline: c must be positive");
  if (!bayesian && opt.statistic == CullStatistic::Posterior)
    throw std::invalid_argument("baseline: posterior culling requires the Bayesian variant");

  const std::size_t n = prior_state.size();
  const int stages = static_cast<int>(schedule.stages());
  const double total = prior_state.remaining_budget;
  const double nu2 = prior_state.noise.nu2;

  PolicyOutcome out;
  BeliefState state = prior_state;
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  Observations last_obs(n);
  Allocation last_alloc = Allocation::zeros(n);
  bool observed_last = false;

  for (int t = 0; t < stages; ++t) {
    if (active.empty()) break;
    const bool final_stage = t == stages - 1;
    double share = schedule.fractions[static_cast<std::size_t>(t)] * total;
    if (final_stage && schedule.absorb_remainder) share = state.remaining_budget;
    share = std::min(share, state.remaining_budget);
    if (!(share > 0.0)) continue;

    Allocation alloc = Allocation::zeros(n);
    const double each = share / static_cast<double>(active.size());
    for (std::size_t i : active) alloc.u[i] = each;
    out.trace.push_back(uniform_record(t, state.remaining_budget, alloc, active.size()));
    out.spent += alloc.total();

    const Observations obs = sensor.observe(t, alloc);
    BeliefState next = posterior_update(state, alloc, obs);
    if (bayesian) out.decision_stages.push_back(t);

    if (final_stage) {
      last_obs = obs;
      last_alloc = alloc;
      observed_last = true;
    } else {
      const CullContext ctx{&state.tests, &next.tests, &prior_state.tests, &alloc, &obs, nu2};
      active = cull(active, ctx, opt);
    }
    state = std::move(next);
  }

  if (bayesian) {
    out.decisions = map_decide_all(state, c);
    return out;
  }

  // Culled tests are declared null; survivors are decided from the initial
  // prior and the final-stage observation alone.
  out.decisions.assign(n, 0);
  if (observed_last) out.decision_stages.push_back(stages - 1);
  for (std::size_t i : active) {
    TestBelief b = prior_state.tests[i];
    if (observed_last && last_obs[i]) b = update_test(b, nu2, last_alloc.u[i], *last_obs[i]);
    out.decisions[i] = map_decide(b.p, c);
  }
  return out;
}

}  // namespace

PolicyOutcome run_na(const BeliefState& prior_state, double c, ObservationSource& sensor) {
  prior_state.validate();
  if (!(c > 0.0)) throw std::invalid_argument("run_na: c must be positive");
  const std::size_t n = prior_state.size();
  PolicyOutcome out;
  if (n == 0) return out;
  const Allocation alloc =
      prior_state.remaining_budget > 0.0
          ? Allocation::uniform(n, prior_state.remaining_budget / static_cast<double>(n))
          : Allocation::zeros(n);
  out.trace.push_back(uniform_record(0, prior_state.remaining_budget, alloc, n));
  out.spent = alloc.total();
  const BeliefState post = posterior_update(prior_state, alloc, sensor.observe(0, alloc));
  out.decision_stages.push_back(0);
  out.decisions = map_decide_all(post, c);
  return out;
}

PolicyOutcome run_ds(const BeliefState& prior_state, const StageSchedule& schedule,
                     bool bayesian, double c, ObservationSource& sensor,
                     const CullingOptions& options) {
  return run_culling(prior_state, schedule, bayesian, c, sensor, options);
}

PolicyOutcome run_st(const BeliefState& prior_state, const StageSchedule& schedule,
                     const ThresholdRule& rule, bool bayesian, double c,
                     ObservationSource& sensor, CullStatistic statistic) {
  StageSchedule s = schedule;
  s.absorb_remainder = true;
  return run_culling(prior_state, s, bayesian, c, sensor, CullingOptions{rule, statistic});
}

}  // namespace adaptive_alloc
