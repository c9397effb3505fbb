#pragma once

// Statistical model for n parallel binary hypothesis tests observed through a
// Gaussian channel whose precision scales with the allocated resource.
//
//   x_i | H_i      ~ N(mu^H, var^H)
//   y_i(t+1) | x_i ~ N(x_i, nu2 / u_i(t))      (no observation when u_i(t) = 0)
//
// All types are plain values; every operation returns a new state.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace adaptive_alloc {

/// Prior for a single test: P(H=1) = p0 and the Gaussian law of x given H.
/// var0 <= var1 is required (hypothesis labels are never swapped silently).
struct TestPrior {
  double p0 = 0.5;
  double mu0 = 0.0;
  double mu1 = 1.0;
  double var0 = 0.0;
  double var1 = 1.0 / 16.0;

  void validate() const;
};

/// Per-test component of the belief state.
struct TestBelief {
  double p = 0.5;
  double mu0 = 0.0;
  double mu1 = 1.0;
  double var0 = 0.0;
  double var1 = 1.0 / 16.0;

  static TestBelief from_prior(const TestPrior& prior);
  void validate() const;

  friend bool operator==(const TestBelief&, const TestBelief&) = default;
};

struct NoiseModel {
  double nu2 = 1.0;

  void validate() const;
};

/// Belief state: posteriors of every test, the remaining budget, and the
/// stage index.
struct BeliefState {
  std::vector<TestBelief> tests;
  double remaining_budget = 0.0;
  int stage = 0;
  NoiseModel noise;

  std::size_t size() const { return tests.size(); }

  /// n identical tests with total budget `budget`.
  static BeliefState homogeneous(const TestPrior& prior, std::size_t n,
                                 double budget, NoiseModel noise = {});

  bool is_homogeneous() const;
  void validate() const;
};

struct Allocation {
  std::vector<double> u;

  Allocation() = default;
  explicit Allocation(std::vector<double> values) : u(std::move(values)) {}
  static Allocation zeros(std::size_t n) { return Allocation(std::vector<double>(n, 0.0)); }
  static Allocation uniform(std::size_t n, double each) {
    return Allocation(std::vector<double>(n, each));
  }

  std::size_t size() const { return u.size(); }
  double total() const;
  /// Throws unless every entry is finite and non-negative.
  void validate() const;
};

using Observations = std::vector<std::optional<double>>;

/// Absolute slack allowed when checking sum(u) <= U: 1e-9 * U.
double budget_tolerance(double budget);

/// One stage of Bayesian updating. Tests with u = 0 carry over unchanged.
/// Throws std::invalid_argument on a missing/extra observation, a negative
/// allocation, or a budget overdraw.
BeliefState posterior_update(const BeliefState& state, const Allocation& alloc,
                             const Observations& obs);

/// Single-test update; exposed for callers that track one test at a time.
TestBelief update_test(const TestBelief& belief, double nu2, double u, double y);

/// Density of y(t+1) given H = h under allocation u > 0.
double predictive_density(const BeliefState& state, std::size_t test, int h,
                          double u, double y);
double predictive_density(const TestBelief& belief, double nu2, int h, double u,
                          double y);
double predictive_variance(const TestBelief& belief, double nu2, int h, double u);

/// Weighted MAP rule: 1 iff c * p > 1 - p; ties go to the null.
int map_decide(double p_final, double c);

std::vector<int> map_decide_all(const BeliefState& state, double c);

}  // namespace adaptive_alloc
