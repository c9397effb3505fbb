#pragma once

// Comparison policies: a single-stage uniform allocation (NA) and multistage
// culling procedures in the style of distilled sensing (DS) and sequential
// thresholding (ST). Each stage spreads its share of the budget uniformly over
// the tests still active, then drops tests whose statistic looks null.
//
// The original variants decide from the final-stage observations alone; the
// Bayesian variants (DSB, STB) keep the same allocations but decide from the
// full posterior.

#include <vector>

#include "adaptive_alloc/core_model.hpp"
#include "adaptive_alloc/policy.hpp"
#include "adaptive_alloc/sensing.hpp"

namespace adaptive_alloc {

/// Per-stage shares of the total budget.
struct StageSchedule {
  std::vector<double> fractions;
  /// The final stage spends whatever is left rather than its nominal share.
  bool absorb_remainder = false;

  std::size_t stages() const { return fractions.size(); }
  void validate() const;

  /// Shares proportional to 2^-t.
  static StageSchedule geometric(int stages);
  /// Equal shares; the final stage absorbs the remainder.
  static StageSchedule equal(int stages);
};

struct ThresholdRule {
  enum class Kind {
    /// Keep a test when its statistic clears a threshold that a null test
    /// clears with probability rho (rho = 0.5 is the sign test at the null mean).
    SignThreshold,
    /// Keep the ceil(rho * m) active tests with the largest statistics.
    QuantileRetain,
  };
  Kind kind = Kind::SignThreshold;
  double rho = 0.5;

  void validate() const;
};

/// Statistic the culling rule looks at.
enum class CullStatistic {
  Observation,  ///< the raw stage observation y
  Posterior,    ///< the posterior probability p (Bayesian variants only)
};

struct CullingOptions {
  ThresholdRule rule;
  CullStatistic statistic = CullStatistic::Observation;
};

PolicyOutcome run_na(const BeliefState& prior_state, double c, ObservationSource& sensor);

/// Distilled-sensing style policy with T = schedule.stages() stages.
PolicyOutcome run_ds(const BeliefState& prior_state, const StageSchedule& schedule,
                     bool bayesian, double c, ObservationSource& sensor,
                     const CullingOptions& options = {});

/// Sequential-thresholding style policy; the final stage always spends the
/// remaining budget.
PolicyOutcome run_st(const BeliefState& prior_state, const StageSchedule& schedule,
                     const ThresholdRule& rule, bool bayesian, double c,
                     ObservationSource& sensor,
                     CullStatistic statistic = CullStatistic::Observation);

}  // namespace adaptive_alloc
