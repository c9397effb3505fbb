#pragma once

#include <vector>

#include "adaptive_alloc/core_model.hpp"

namespace adaptive_alloc {

struct StageRecord {
  int stage = 0;
  double budget_before = 0.0;
  double spent = 0.0;
  std::size_t active = 0;  ///< tests with u > 0
  bool certified = false;
  bool rescaled = false;
  Allocation allocation;
};

/// What a policy hands back after its final stage.
struct PolicyOutcome {
  std::vector<int> decisions;
  double spent = 0.0;
  std::vector<StageRecord> trace;
  /// Stages whose observations can influence the decisions.
  std::vector<int> decision_stages;
};

}  // namespace adaptive_alloc
