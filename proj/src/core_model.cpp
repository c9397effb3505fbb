#include "adaptive_alloc/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace adaptive_alloc {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite_all(std::initializer_list<double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

double log_normal_pdf(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

}  // namespace

void TestPrior::validate() const {
  require(finite_all({p0, mu0, mu1, var0, var1}), "TestPrior: non-finite parameter");
  require(p0 >= 0.0 && p0 <= 1.0, "TestPrior: p0 must lie in [0, 1]");
  require(var0 >= 0.0 && var1 >= 0.0, "TestPrior: variances must be non-negative");
  require(var0 <= var1, "TestPrior: var0 > var1 is not supported; relabel the hypotheses");
}

TestBelief TestBelief::from_prior(const TestPrior& prior) {
  prior.validate();
  return {prior.p0, prior.mu0, prior.mu1, prior.var0, prior.var1};
}

void TestBelief::validate() const {
  require(finite_all({p, mu0, mu1, var0, var1}), "TestBelief: non-finite parameter");
  require(p >= 0.0 && p <= 1.0, "TestBelief: p must lie in [0, 1]");
  require(var0 >= 0.0 && var1 >= 0.0, "TestBelief: variances must be non-negative");
}

void NoiseModel::validate() const {
  require(std::isfinite(nu2) && nu2 > 0.0, "NoiseModel: nu2 must be positive");
}

BeliefState BeliefState::homogeneous(const TestPrior& prior, std::size_t n,
                                     double budget, NoiseModel noise) {
  BeliefState s;
  s.tests.assign(n, TestBelief::from_prior(prior));
  s.remaining_budget = budget;
  s.noise = noise;
  s.validate();
  return s;
}

bool BeliefState::is_homogeneous() const {
  for (const auto& t : tests)
    if (!(t == tests.front())) return false;
  return true;
}

void BeliefState::validate() const {
  noise.validate();
  require(std::isfinite(remaining_budget) && remaining_budget >= 0.0,
          "BeliefState: remaining budget must be non-negative");
  require(stage >= 0, "BeliefState: negative stage index");
  for (const auto& t : tests) t.validate();
}

double Allocation::total() const {
  double s = 0.0;
  for (double v : u) s += v;
  return s;
}

void Allocation::validate() const {
  for (double v : u)
    require(std::isfinite(v) && v >= 0.0, "Allocation: entries must be finite and non-negative");
}

double budget_tolerance(double budget) { return 1e-9 * budget; }

double predictive_variance(const TestBelief& belief, double nu2, int h, double u) {
  if (!(u > 0.0)) throw std::invalid_argument("predictive density requires u > 0");
  return (h == 0 ? belief.var0 : belief.var1) + nu2 / u;
}

double predictive_density(const TestBelief& belief, double nu2, int h, double u,
                          double y) {
  const double var = predictive_variance(belief, nu2, h, u);
  const double mean = h == 0 ? belief.mu0 : belief.mu1;
  return std::exp(log_normal_pdf(y, mean, var));
}

double predictive_density(const BeliefState& state, std::size_t test, int h, double u,
                          double y) {
  if (test >= state.size()) throw std::out_of_range("predictive_density: test index");
  return predictive_density(state.tests[test], state.noise.nu2, h, u, y);
}

TestBelief update_test(const TestBelief& belief, double nu2, double u, double y) {
  if (u == 0.0) return belief;
  const double l0 = log_normal_pdf(y, belief.mu0, belief.var0 + nu2 / u);
  const double l1 = log_normal_pdf(y, belief.mu1, belief.var1 + nu2 / u);

  TestBelief next = belief;
  // Divide through by the larger density so neither exponential overflows.
  if (belief.p <= 0.0 || belief.p >= 1.0) {
    next.p = belief.p;
  } else if (l1 >= l0) {
    next.p = belief.p / (belief.p + (1.0 - belief.p) * std::exp(l0 - l1));
  } else {
    const double w = belief.p * std::exp(l1 - l0);
    next.p = w / (w + (1.0 - belief.p));
  }

  auto shrink = [&](double mean, double var, double& out_mean, double& out_var) {
    const double denom = nu2 + var * u;
    out_mean = (nu2 * mean + var * u * y) / denom;
    out_var = nu2 * var / denom;
  };
  shrink(belief.mu0, belief.var0, next.mu0, next.var0);
  shrink(belief.mu1, belief.var1, next.mu1, next.var1);
  return next;
}

BeliefState posterior_update(const BeliefState& state, const Allocation& alloc,
                             const Observations& obs) {
  const std::size_t n = state.size();
  if (alloc.size() != n || obs.size() != n)
    throw std::invalid_argument("posterior_update: size mismatch");
  alloc.validate();
  const double spent = alloc.total();
  if (spent > state.remaining_budget + budget_tolerance(state.remaining_budget))
    throw std::invalid_argument("posterior_update: allocation exceeds the remaining budget");

  BeliefState next = state;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = alloc.u[i];
    if (u > 0.0) {
      if (!obs[i].has_value())
        throw std::invalid_argument("posterior_update: missing observation for test " +
                                    std::to_string(i));
      if (!std::isfinite(*obs[i]))
        throw std::invalid_argument("posterior_update: non-finite observation");
      next.tests[i] = update_test(state.tests[i], state.noise.nu2, u, *obs[i]);
    } else if (obs[i].has_value()) {
      throw std::invalid_argument("posterior_update: observation supplied for test " +
                                  std::to_string(i) + " with zero allocation");
    }
  }
  next.remaining_budget = std::max(0.0, state.remaining_budget - spent);
  next.stage = state.stage + 1;
  return next;
}

int map_decide(double p_final, double c) {
  return c * p_final > 1.0 - p_final ? 1 : 0;
}

std::vector<int> map_decide_all(const BeliefState& state, double c) {
  std::vector<int> out;
  out.reserve(state.size());
  for (const auto& t : state.tests) out.push_back(map_decide(t.p, c));
  return out;
}

}  // namespace adaptive_alloc
