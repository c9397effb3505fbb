#include "adaptive_alloc/single_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>

#include <boost/math/tools/minima.hpp>

#include "adaptive_alloc/parallel.hpp"

namespace adaptive_alloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBrentBits = std::numeric_limits<double>::digits / 2;

// Scans candidate points xs (ascending) with objective values gx, refines every
// local minimum of the sampled sequence inside its neighbouring cell, and
// returns the best point. When `last_is_candidate` is false the final entry
// only bounds the last cell. Ties keep the smaller u.
template <class G>
InnerMinimum refine_candidates(G&& g, std::span<const double> xs,
                               std::span<const double> gx, bool last_is_candidate,
                               int refine_iters) {
  const std::size_t m = xs.size();
  const std::size_t mc = last_is_candidate ? m : m - 1;
  InnerMinimum best{xs[0], gx[0]};
  auto consider = [&](double x, double v) {
    if (v < best.value || (v == best.value && x < best.u)) best = {x, v};
  };
  for (std::size_t k = 0; k < mc; ++k) {
    const double left = k > 0 ? gx[k - 1] : kInf;
    const double right = k + 1 < mc ? gx[k + 1] : kInf;
    if (!(gx[k] < left && gx[k] <= right)) continue;
    consider(xs[k], gx[k]);
    if (refine_iters <= 0) continue;
    const double a = xs[k > 0 ? k - 1 : 0];
    const double b = xs[std::min(k + 1, m - 1)];
    if (!(b > a)) continue;
    std::uintmax_t iters = static_cast<std::uintmax_t>(refine_iters);
    const auto [x, v] = boost::math::tools::brent_find_minima(g, a, b, kBrentBits, iters);
    consider(x, v);
  }
  return best;
}

std::vector<double> log_grid(double from, double to, int points) {
  std::vector<double> xs;
  if (!(to > from) || points <= 0) return xs;
  xs.reserve(static_cast<std::size_t>(points));
  if (points == 1) {
    xs.push_back(from);
    return xs;
  }
  const double lf = std::log(from);
  const double step = (std::log(to) - lf) / (points - 1);
  for (int k = 0; k < points; ++k) xs.push_back(std::exp(lf + step * k));
  xs.back() = to;
  return xs;
}

// One distinct test of the instance, with lazily evaluated risk on the shared
// grid.
struct Group {
  RiskCurve curve;
  double r0 = 0.0;
  double count = 0.0;
  std::vector<std::size_t> members;
};

struct Bound {
  double u = 0.0;
  double risk = 0.0;
};

class InstanceSolver {
 public:
  InstanceSolver(std::vector<Group> groups, double budget, double u_floor,
                 const LagrangianSolverConfig& cfg)
      : groups_(std::move(groups)), budget_(budget), cfg_(cfg) {
    grid_ = log_grid(u_floor, budget, cfg.grid_points);
    cache_.assign(groups_.size() * grid_.size(), std::numeric_limits<double>::quiet_NaN());
  }

  std::size_t size() const { return groups_.size(); }
  const Group& group(std::size_t g) const { return groups_[g]; }

  // Minimizer of R_g(u) + lambda u over [lower.u, upper].
  Bound minimize(std::size_t g, double lambda, Bound lower, double upper) {
    const Group& grp = groups_[g];
    double cap = upper;
    bool cap_is_candidate = true;
    if (lambda > 0.0 && grp.r0 / lambda <= cap) {
      cap = grp.r0 / lambda;
      cap_is_candidate = false;
    }
    if (cap - lower.u <= 1e-12 * std::max(cap, 1e-300)) return lower;

    auto objective = [&](double u) { return grp.curve(u) + lambda * u; };

    thread_local std::vector<double> xs;
    thread_local std::vector<double> gx;
    xs.clear();
    gx.clear();
    xs.push_back(lower.u);
    gx.push_back(lower.risk + lambda * lower.u);
    auto first = std::upper_bound(grid_.begin(), grid_.end(), lower.u);
    for (auto it = first; it != grid_.end() && *it < cap; ++it) {
      const std::size_t k = static_cast<std::size_t>(it - grid_.begin());
      double& cached = cache_[g * grid_.size() + k];
      if (std::isnan(cached)) cached = grp.curve(*it);
      xs.push_back(*it);
      gx.push_back(cached + lambda * *it);
    }
    xs.push_back(cap);
    gx.push_back(cap_is_candidate ? objective(cap) : kInf);

    const InnerMinimum best =
        refine_candidates(objective, xs, gx, cap_is_candidate, cfg_.refine_iters);
    if (best.u == lower.u) return lower;
    return {best.u, grp.curve(best.u)};
  }

 private:
  std::vector<Group> groups_;
  double budget_;
  LagrangianSolverConfig cfg_;
  std::vector<double> grid_;
  std::vector<double> cache_;
};

std::vector<Group> group_tests(const BeliefState& state, double c) {
  using Key = std::tuple<double, double, double, double, double>;
  std::map<Key, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const TestBelief& t = state.tests[i];
    const Key key{t.p, t.mu0, t.mu1, t.var0, t.var1};
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) {
      Group grp;
      grp.curve = RiskCurve(t, state.noise.nu2, c);
      grp.r0 = grp.curve.at_zero();
      groups.push_back(std::move(grp));
    }
    Group& grp = groups[it->second];
    grp.count += 1.0;
    grp.members.push_back(i);
  }
  return groups;
}

}  // namespace

void LagrangianSolverConfig::validate() const {
  if (grid_points <= 0 || refine_iters <= 0 || max_bisect <= 0 || workers <= 0)
    throw std::invalid_argument("LagrangianSolverConfig: counts must be positive");
  if (!(lambda_tol > 0.0)) throw std::invalid_argument("LagrangianSolverConfig: lambda_tol");
  if (!(bracket_rtol >= 0.0)) throw std::invalid_argument("LagrangianSolverConfig: bracket_rtol");
  if (u_floor < 0.0 || !std::isfinite(u_floor))
    throw std::invalid_argument("LagrangianSolverConfig: u_floor");
}

double allocation_sum(std::span<const double> u) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : u) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

InnerMinimum lagrangian_min(const std::function<double(double)>& risk, double lambda,
                            double lo, double hi, const InnerSearchOptions& opts) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw std::invalid_argument("lagrangian_min: lambda must be finite and >= 0");
  if (!(lo >= 0.0) || !(lo <= hi)) throw std::invalid_argument("lagrangian_min: need 0 <= lo <= hi");
  if (opts.grid_points <= 0 || !(opts.u_floor > 0.0))
    throw std::invalid_argument("lagrangian_min: invalid search options");

  const double r0 = risk(0.0);
  double cap = hi;
  bool cap_is_candidate = true;
  if (lambda > 0.0 && r0 / lambda <= cap) {
    cap = r0 / lambda;
    cap_is_candidate = false;
  }
  if (!std::isfinite(cap))
    throw std::invalid_argument("lagrangian_min: unbounded interval with lambda = 0");
  auto objective = [&](double u) { return risk(u) + lambda * u; };
  if (cap <= lo) return {lo, objective(lo)};

  std::vector<double> xs{lo};
  const double start = lo > 0.0 ? lo : opts.u_floor;
  for (double x : log_grid(start, cap, opts.grid_points))
    if (x > lo && x < cap) xs.push_back(x);
  xs.push_back(cap);
  std::vector<double> gx;
  gx.reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k)
    gx.push_back(k + 1 == xs.size() && !cap_is_candidate ? kInf : objective(xs[k]));
  return refine_candidates(objective, xs, gx, cap_is_candidate, opts.refine_iters);
}

double total_risk(const BeliefState& state, const Allocation& alloc, double c) {
  if (alloc.size() != state.size()) throw std::invalid_argument("total_risk: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i)
    sum += RiskCurve(state.tests[i], state.noise.nu2, c)(alloc.u[i]);
  return sum;
}

AllocationResult solve_single_stage(const BeliefState& state, double c,
                                    const LagrangianSolverConfig& cfg) {
  cfg.validate();
  const std::size_t n = state.size();
  const double budget = state.remaining_budget;
  if (n == 0) throw std::invalid_argument("solve_single_stage: no tests");
  if (!(budget > 0.0) || !std::isfinite(budget))
    throw std::invalid_argument("solve_single_stage: budget must be positive");
  if (!(c > 0.0)) throw std::invalid_argument("solve_single_stage: c must be positive");

  std::vector<Group> groups = group_tests(state, c);
  const double u_floor = cfg.u_floor > 0.0 ? cfg.u_floor : 1e-8 * budget / static_cast<double>(n);
  InstanceSolver solver(std::move(groups), budget, std::min(u_floor, budget), cfg);
  const std::size_t m = solver.size();

  AllocationResult result;
  auto expand = [&](const std::vector<double>& per_group) {
    std::vector<double> u(n, 0.0);
    for (std::size_t g = 0; g < m; ++g)
      for (std::size_t i : solver.group(g).members) u[i] = per_group[g];
    return u;
  };
  auto demand = [&](const std::vector<Bound>& sol) {
    std::vector<double> parts(m);
    for (std::size_t g = 0; g < m; ++g) parts[g] = solver.group(g).count * sol[g].u;
    return allocation_sum(parts);
  };

  double risk_at_zero = 0.0;
  for (std::size_t g = 0; g < m; ++g) risk_at_zero += solver.group(g).count * solver.group(g).r0;

  std::vector<Bound> lower(m);
  std::vector<double> upper(m, budget);
  for (std::size_t g = 0; g < m; ++g) lower[g] = {0.0, solver.group(g).r0};

  auto solve_at = [&](double lambda) {
    std::vector<Bound> sol(m);
    const int workers = m >= 256 ? cfg.workers : 1;
    parallel_for(m, workers,
                 [&](std::size_t g) { sol[g] = solver.minimize(g, lambda, lower[g], upper[g]); });
    return sol;
  };
  auto record = [&](double lambda, double s, const std::vector<Bound>& sol) {
    BisectionStep step{lambda, s, {}, {}, {}};
    if (cfg.record_trace) {
      std::vector<double> u(m), lo(m);
      for (std::size_t g = 0; g < m; ++g) {
        u[g] = sol[g].u;
        lo[g] = lower[g].u;
      }
      step.u = expand(u);
      step.lower = expand(lo);
      step.upper = expand(upper);
    }
    result.trace.push_back(std::move(step));
  };

  struct Iterate {
    double lambda;
    double demand;
    std::vector<Bound> sol;
  };
  std::optional<Iterate> below;  // last iterate with S < U
  std::optional<Iterate> above;  // last iterate with S > U
  std::optional<Iterate> accepted;

  const double tol = cfg.lambda_tol * budget;
  if (risk_at_zero > 0.0) {
    double lam_lo = 0.0;
    double lam_hi = risk_at_zero / budget;
    // At lambda = 0 every informative test demands the whole budget, so
    // S(0) >= 2U unless at most one test carries risk. Only that case needs
    // the explicit probe.
    double informative = 0.0;
    for (std::size_t g = 0; g < m; ++g)
      if (solver.group(g).r0 > 0.0) informative += solver.group(g).count;
    if (informative <= 1.0) {
      auto sol = solve_at(0.0);
      const double s = demand(sol);
      record(0.0, s, sol);
      if (std::abs(s - budget) <= tol) {
        accepted = Iterate{0.0, s, std::move(sol)};
      } else if (s > budget) {
        for (std::size_t g = 0; g < m; ++g) upper[g] = sol[g].u;
        above = Iterate{0.0, s, std::move(sol)};
      } else {
        below = Iterate{0.0, s, std::move(sol)};
        lam_hi = 0.0;
      }
    }
    for (int it = 0; !accepted && it < cfg.max_bisect && lam_hi > 0.0; ++it) {
      const double lambda = 0.5 * (lam_lo + lam_hi);
      if (!(lambda > lam_lo && lambda < lam_hi)) break;
      if (lam_hi - lam_lo <= cfg.bracket_rtol * lam_hi) break;
      auto sol = solve_at(lambda);
      const double s = demand(sol);
      record(lambda, s, sol);
      if (std::abs(s - budget) <= tol) {
        accepted = Iterate{lambda, s, std::move(sol)};
      } else if (s < budget) {
        lam_hi = lambda;
        lower = sol;
        below = Iterate{lambda, s, std::move(sol)};
      } else {
        lam_lo = lambda;
        for (std::size_t g = 0; g < m; ++g) upper[g] = sol[g].u;
        above = Iterate{lambda, s, std::move(sol)};
      }
    }
  }

  std::vector<double> per_group(m, 0.0);
  if (accepted) {
    result.certified = true;
    result.lambda = accepted->lambda;
    for (std::size_t g = 0; g < m; ++g) per_group[g] = accepted->sol[g].u;
  } else {
    const Iterate* pick = nullptr;
    for (const auto* cand : {above ? &*above : nullptr, below ? &*below : nullptr}) {
      if (!cand || !(cand->demand > 0.0)) continue;
      if (!pick || std::abs(cand->demand - budget) < std::abs(pick->demand - budget)) pick = cand;
    }
    if (pick) {
      result.lambda = pick->lambda;
      for (std::size_t g = 0; g < m; ++g) per_group[g] = pick->sol[g].u;
      result.rescaled = true;
    } else {
      // Every Lagrangian component is flat (all risks vanish): any split is optimal.
      std::fill(per_group.begin(), per_group.end(), budget / static_cast<double>(n));
      result.certified = true;
    }
  }

  result.raw = expand(per_group);
  std::vector<double> parts(m);
  for (std::size_t g = 0; g < m; ++g) parts[g] = solver.group(g).count * per_group[g];
  const double s = allocation_sum(parts);
  const double scale = s > 0.0 ? budget / s : 0.0;
  double objective = 0.0;
  for (std::size_t g = 0; g < m; ++g) {
    per_group[g] *= scale;
    objective += solver.group(g).count * solver.group(g).curve(per_group[g]);
  }
  result.allocation = Allocation(expand(per_group));
  result.objective = objective;
  return result;
}

}  // namespace adaptive_alloc
