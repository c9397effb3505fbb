#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "adaptive_alloc/bayes_risk.hpp"
#include "adaptive_alloc/sensing.hpp"
#include "adaptive_alloc/sim_harness.hpp"

using namespace adaptive_alloc;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 120;
  cfg.B_grid = {1.0, 4.0};
  cfg.p0_grid = {0.5, 0.1};
  cfg.trials = 6;
  cfg.T_list = {2, 3};
  cfg.rho_grid = {0.5, 0.8};
  cfg.policies = {"NA", "OLFC-2", "DS", "DSB", "ST", "STB"};
  cfg.calibration.mc_samples = 8;
  cfg.calibration.beta_grid = 5;
  cfg.calibration.golden_iters = 2;
  cfg.seed = 42;
  return cfg;
}

bool same_outputs(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].policy != b[i].policy || a[i].B != b[i].B || a[i].p0 != b[i].p0 ||
        a[i].trial != b[i].trial || a[i].errors != b[i].errors || a[i].type1 != b[i].type1 ||
        a[i].type2 != b[i].type2 || a[i].spent != b[i].spent)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("sim_harness") {
  TEST_CASE("policy descriptors") {
    CHECK(PolicySpec::parse("OLFC-3").stages == 3);
    CHECK(PolicySpec::parse("OLFC-3").id() == "OLFC-3");
    for (const char* id : {"NA", "DS", "DSB", "ST", "STB"}) CHECK(PolicySpec::parse(id).id() == id);
    CHECK(PolicySpec::parse("STB").is_bayesian());
    CHECK_FALSE(PolicySpec::parse("ST").is_bayesian());
    for (const char* bad : {"", "OLFC", "OLFC-", "OLFC-0", "OLFC-2x", "na", "XYZ"})
      CHECK_THROWS_AS(PolicySpec::parse(bad), std::invalid_argument);
  }

  TEST_CASE("truth sampling") {
    const CounterRng rng(1);
    const GroundTruth pm = sample_truth(TestPrior{0.5, -1.0, 2.0, 0.0, 0.0}, 500, rng, 0);
    for (std::size_t i = 0; i < 500; ++i) CHECK(pm.x[i] == (pm.hypothesis[i] ? 2.0 : -1.0));
    const GroundTruth none = sample_truth(TestPrior{0.0, 0.0, 1.0, 0.0, 0.1}, 500, rng, 0);
    for (int h : none.hypothesis) CHECK(h == 0);

    const double p0 = 0.3;
    const GroundTruth big = sample_truth(TestPrior{p0, 0.0, 1.0, 0.0, 0.1}, 100000, rng, 7);
    double mean = 0.0;
    for (int h : big.hypothesis) mean += h;
    mean /= 100000.0;
    CHECK(std::abs(mean - p0) <= 3.0 * std::sqrt(p0 * (1.0 - p0) / 1e5));
  }

  TEST_CASE("observation sampling") {
    const CounterRng rng(2);
    const std::vector<double> x{0.5, 1.0};
    const Observations y = sample_obs(x, Allocation({0.0, 2.0}), 1.0, rng, 0, 0);
    CHECK_FALSE(y[0].has_value());
    CHECK(y[1].has_value());
    CHECK(sample_obs(x, Allocation({1.0, 2.0}), 1.0, rng, 3, 1) ==
          sample_obs(x, Allocation({1.0, 2.0}), 1.0, rng, 3, 1));

    const double u = 100.0;
    double s = 0.0, s2 = 0.0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
      const double d = *sample_obs({0.0}, Allocation({u}), 1.0, rng, r, 0)[0];
      s += d;
      s2 += d * d;
    }
    const double var = s2 / reps - (s / reps) * (s / reps);
    CHECK(std::abs(var / (1.0 / u) - 1.0) < 0.1);
  }

  TEST_CASE("stage noise is independent of the branch only after the first stage") {
    const std::vector<double> x{0.0, 1.0};
    const Allocation a({1.0, 1.0});
    SimulatedSensor s0(x, 1.0, CounterRng(3), 0, 0);
    SimulatedSensor s1(x, 1.0, CounterRng(3), 0, 1);
    CHECK(s0.observe(0, a) == s1.observe(0, a));
    CHECK(s0.observe(1, a) != s1.observe(1, a));
  }

  TEST_CASE("scoring") {
    const TrialRecord ok = score_trial({0, 1, 1}, {0, 1, 1}, 1.0);
    CHECK(ok.errors == 0);
    const TrialRecord r = score_trial({1, 0, 1, 0}, {0, 1, 1, 1}, 2.0);
    CHECK(r.type1 == 1);
    CHECK(r.type2 == 2);
    CHECK(r.errors == 3);
    CHECK(r.weighted_risk == 5.0);
    CHECK_THROWS_AS(score_trial({0}, {0, 1}, 1.0), std::invalid_argument);
  }

  TEST_CASE("config validation") {
    ExperimentConfig cfg = small_config();
    cfg.trials = 0;
    CHECK_THROWS_AS(run_experiment(cfg, in_memory_calibration(cfg)), std::invalid_argument);
    cfg = small_config();
    cfg.policies.clear();
    CHECK_THROWS_AS(run_experiment(cfg, in_memory_calibration(cfg)), std::invalid_argument);
    cfg = small_config();
    cfg.policies = {"NA", "bogus"};
    CHECK_THROWS_AS(run_experiment(cfg, in_memory_calibration(cfg)), std::invalid_argument);
    cfg = small_config();
    cfg.B_grid = {1.0, 0.0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    CHECK_THROWS_AS(run_experiment(cfg, nullptr), std::invalid_argument);
  }

  TEST_CASE("NA matches the closed-form risk") {
    ExperimentConfig cfg;
    cfg.n = 1000;
    cfg.trials = 100;
    cfg.policies = {"NA"};
    cfg.B_grid = {0.5, 2.0, 6.0};
    cfg.p0_grid = {0.05, 0.3, 0.5};
    const auto rows = summarize(run_experiment(cfg, nullptr).records);
    CHECK(rows.size() == 9);
    for (const auto& row : rows) {
      TestBelief b = TestBelief::from_prior(cfg.prior);
      b.p = row.p0;
      const double expected = cfg.n * bayes_risk(RiskParams::from_belief(b, 1.0, row.B, 1.0));
      CHECK(std::abs(row.mean_errors - expected) <= 3.0 * row.std_err);
    }
  }

  TEST_CASE("full grid: ordering, budget, selection and worker independence") {
    ExperimentConfig cfg = small_config();
    const ExperimentResult one = run_experiment(cfg, in_memory_calibration(cfg));
    cfg.workers = 3;
    const ExperimentResult three = run_experiment(cfg, in_memory_calibration(cfg));
    CHECK(same_outputs(one.records, three.records));

    const std::size_t cells = cfg.policies.size() * cfg.B_grid.size() * cfg.p0_grid.size();
    CHECK(one.records.size() == cells * cfg.trials);
    CHECK(one.records.front().policy == "NA");
    CHECK(one.records.front().p0 == 0.5);
    CHECK(one.records.front().B == 1.0);
    CHECK(one.records[1].trial == 1);
    for (const auto& r : one.records) {
      CHECK(r.spent <= r.B * cfg.n * (1.0 + 1e-6));
      CHECK(r.errors == r.type1 + r.type2);
      CHECK(r.errors <= static_cast<int>(cfg.n));
    }

    const auto rows = summarize(one.records);
    CHECK(rows.size() == cells);
    CHECK(one.selections.size() == 4 * cfg.B_grid.size() * cfg.p0_grid.size());
    for (const auto& sel : one.selections) {
      CHECK((sel.stages == 2 || sel.stages == 3));
      for (const auto& row : rows)
        if (row.policy == sel.policy && row.B == sel.B && row.p0 == sel.p0)
          CHECK(row.mean_errors == doctest::Approx(sel.mean_errors));
    }
  }

  TEST_CASE("summaries") {
    TrialRecord a;
    a.policy = "NA";
    a.B = 1.0;
    a.p0 = 0.5;
    a.errors = 10;
    const auto single = summarize({a});
    CHECK(single.size() == 1);
    CHECK(single[0].mean_errors == 10.0);
    CHECK(single[0].std_err == 0.0);
    TrialRecord b = a;
    b.errors = 20;
    b.trial = 1;
    const auto two = summarize({a, b});
    CHECK(two[0].mean_errors == 15.0);
    CHECK(two[0].std_err == doctest::Approx(5.0));
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);

    std::vector<TrialRecord> pooled;
    double shard_total = 0.0;
    for (int shard = 0; shard < 3; ++shard) {
      std::vector<TrialRecord> part;
      for (int t = 0; t < 4; ++t) {
        TrialRecord r = a;
        r.trial = shard * 4 + t;
        r.errors = (shard + 1) * (t + 2);
        part.push_back(r);
        pooled.push_back(r);
      }
      shard_total += summarize(part)[0].mean_errors * 4;
    }
    CHECK(summarize(pooled)[0].mean_errors == doctest::Approx(shard_total / 12.0));
  }
}
