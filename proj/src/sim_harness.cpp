#include "adaptive_alloc/sim_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "adaptive_alloc/parallel.hpp"
#include "adaptive_alloc/sensing.hpp"

namespace adaptive_alloc {

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec spec;
  if (text == "NA") return spec;
  if (text == "DS") return {Kind::DS, 0};
  if (text == "DSB") return {Kind::DSB, 0};
  if (text == "ST") return {Kind::ST, 0};
  if (text == "STB") return {Kind::STB, 0};
  if (text.rfind("OLFC-", 0) == 0 && text.size() > 5) {
    const std::string digits = text.substr(5);
    if (digits.find_first_not_of("0123456789") == std::string::npos && digits.size() <= 3) {
      const int t = std::stoi(digits);
      if (t >= 1) return {Kind::OLFC, t};
    }
  }
  throw std::invalid_argument("unknown policy descriptor: '" + text + "'");
}

std::string PolicySpec::id() const {
  switch (kind) {
    case Kind::NA: return "NA";
    case Kind::OLFC: return "OLFC-" + std::to_string(stages);
    case Kind::DS: return "DS";
    case Kind::DSB: return "DSB";
    case Kind::ST: return "ST";
    case Kind::STB: return "STB";
  }
  return "?";
}

bool PolicySpec::is_culling() const {
  return kind == Kind::DS || kind == Kind::DSB || kind == Kind::ST || kind == Kind::STB;
}

void ExperimentConfig::validate() const {
  if (n < 1) throw std::invalid_argument("config: n must be >= 1");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (policies.empty()) throw std::invalid_argument("config: policy list is empty");
  if (B_grid.empty()) throw std::invalid_argument("config: B_grid is empty");
  if (p0_grid.empty()) throw std::invalid_argument("config: p0_grid is empty");
  for (double B : B_grid)
    if (!std::isfinite(B) || !(B > 0.0)) throw std::invalid_argument("config: every B must be > 0");
  for (double p0 : p0_grid) {
    TestPrior p = prior;
    p.p0 = p0;
    p.validate();
  }
  if (!std::isfinite(nu2) || !(nu2 > 0.0)) throw std::invalid_argument("config: nu2 must be > 0");
  if (!std::isfinite(c) || !(c > 0.0)) throw std::invalid_argument("config: c must be > 0");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  const auto specs = policy_specs();
  bool culling = false;
  for (const auto& s : specs) culling = culling || s.is_culling();
  if (culling) {
    if (T_list.empty()) throw std::invalid_argument("config: T_list is empty");
    for (int t : T_list)
      if (t < 1) throw std::invalid_argument("config: T_list entries must be >= 1");
    if (rho_grid.empty()) throw std::invalid_argument("config: rho_grid is empty");
    for (double r : rho_grid) ThresholdRule{ThresholdRule::Kind::QuantileRetain, r}.validate();
    ThresholdRule{ThresholdRule::Kind::SignThreshold, ds_rho}.validate();
  }
  solver.validate();
  calibration.validate();
}

std::vector<PolicySpec> ExperimentConfig::policy_specs() const {
  std::vector<PolicySpec> out;
  for (const auto& p : policies) out.push_back(PolicySpec::parse(p));
  return out;
}

BeliefState ExperimentConfig::prior_state(double B, double p0) const {
  TestPrior p = prior;
  p.p0 = p0;
  return BeliefState::homogeneous(p, n, B * static_cast<double>(n), NoiseModel{nu2});
}

CalibrationConfig calibration_for(const ExperimentConfig& cfg, int stages, double B, double p0) {
  CalibrationConfig cal = cfg.calibration;
  cal.seed = CounterRng(cfg.calibration.seed)
                 .bits({static_cast<std::uint64_t>(stages), key_of(B), key_of(p0)});
  cal.workers = std::max(cal.workers, cfg.workers);
  return cal;
}

CalibrationProvider in_memory_calibration(const ExperimentConfig& cfg) {
  struct Cache {
    std::mutex mutex;
    std::map<std::tuple<int, double, double>, BetaTable> tables;
  };
  auto cache = std::make_shared<Cache>();
  return [cfg, cache](int stages, double B, double p0) -> BetaTable {
    std::lock_guard lock(cache->mutex);
    BetaTable table;
    for (int t = 1; t <= stages; ++t) {
      const auto key = std::make_tuple(t, B, p0);
      if (auto it = cache->tables.find(key); it != cache->tables.end()) {
        table = it->second;
        continue;
      }
      LagrangianSolverConfig solver = cfg.solver;
      solver.workers = 1;
      table = calibrate_beta0(cfg.prior_state(B, p0), t, table, cfg.c,
                              calibration_for(cfg, t, B, p0), solver)
                  .table;
      cache->tables.emplace(key, table);
    }
    return table;
  };
}

TrialRecord score_trial(const std::vector<int>& decisions, const std::vector<int>& truth,
                        double c) {
  if (decisions.size() != truth.size())
    throw std::invalid_argument("score_trial: decision and truth sizes differ");
  TrialRecord rec;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (decisions[i] == truth[i]) continue;
    if (decisions[i] == 1)
      ++rec.type1;
    else
      ++rec.type2;
  }
  rec.errors = rec.type1 + rec.type2;
  rec.weighted_risk = rec.type1 + c * rec.type2;
  return rec;
}

namespace {

struct Variant {
  int stages = 1;
  double rho = 0.0;
};

struct Cell {
  std::size_t policy;
  double B;
  double p0;
  std::vector<Variant> variants;
  BetaTable table;
};

std::vector<Variant> variants_for(const PolicySpec& spec, const ExperimentConfig& cfg) {
  std::vector<Variant> out;
  switch (spec.kind) {
    case PolicySpec::Kind::NA:
    case PolicySpec::Kind::OLFC: out.push_back({spec.stages, 0.0}); break;
    case PolicySpec::Kind::DS:
    case PolicySpec::Kind::DSB:
      for (int t : cfg.T_list) out.push_back({t, cfg.ds_rho});
      break;
    case PolicySpec::Kind::ST:
    case PolicySpec::Kind::STB:
      for (int t : cfg.T_list)
        for (double r : cfg.rho_grid) out.push_back({t, r});
      break;
  }
  return out;
}

PolicyOutcome execute(const PolicySpec& spec, const Variant& v, const Cell& cell,
                      const ExperimentConfig& cfg, const BeliefState& prior,
                      ObservationSource& sensor) {
  switch (spec.kind) {
    case PolicySpec::Kind::NA: return run_na(prior, cfg.c, sensor);
    case PolicySpec::Kind::OLFC: {
      LagrangianSolverConfig solver = cfg.solver;
      solver.workers = 1;
      return run_olfc(prior, cell.table, cfg.c, solver, sensor);
    }
    case PolicySpec::Kind::DS:
    case PolicySpec::Kind::DSB: {
      const bool bayes = spec.is_bayesian();
      CullingOptions opt{{ThresholdRule::Kind::SignThreshold, v.rho},
                         bayes ? cfg.bayesian_cull : CullStatistic::Observation};
      return run_ds(prior, StageSchedule::geometric(v.stages), bayes, cfg.c, sensor, opt);
    }
    case PolicySpec::Kind::ST:
    case PolicySpec::Kind::STB: {
      const bool bayes = spec.is_bayesian();
      return run_st(prior, StageSchedule::equal(v.stages),
                    {ThresholdRule::Kind::QuantileRetain, v.rho}, bayes, cfg.c, sensor,
                    bayes ? cfg.bayesian_cull : CullStatistic::Observation);
    }
  }
  throw std::logic_error("execute: unhandled policy");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const CalibrationProvider& provider) {
  cfg.validate();
  const std::vector<PolicySpec> specs = cfg.policy_specs();

  std::vector<Cell> cells;
  for (std::size_t p = 0; p < specs.size(); ++p)
    for (double p0 : cfg.p0_grid)
      for (double B : cfg.B_grid) {
        Cell cell{p, B, p0, variants_for(specs[p], cfg), {}};
        if (specs[p].kind == PolicySpec::Kind::OLFC) {
          if (!provider) throw std::invalid_argument("run_experiment: missing calibration");
          cell.table = provider(specs[p].stages, B, p0);
          if (cell.table.stages != specs[p].stages)
            throw std::invalid_argument("run_experiment: calibration table has wrong stage count");
          cell.table.validate();
        }
        cells.push_back(std::move(cell));
      }

  struct Job {
    std::size_t cell;
    std::size_t variant;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < cells.size(); ++k)
    for (std::size_t v = 0; v < cells[k].variants.size(); ++v)
      for (int t = 0; t < cfg.trials; ++t) jobs.push_back({k, v, t});

  const CounterRng rng(cfg.seed);
  std::vector<TrialRecord> raw(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    const auto start = std::chrono::steady_clock::now();
    const Job& job = jobs[j];
    const Cell& cell = cells[job.cell];
    const PolicySpec& spec = specs[cell.policy];
    const BeliefState prior = cfg.prior_state(cell.B, cell.p0);
    const auto trial = static_cast<std::uint64_t>(job.trial);
    GroundTruth truth = sample_truth(prior.tests, rng, trial);
    SimulatedSensor sensor(std::move(truth.x), cfg.nu2, rng, trial);
    const PolicyOutcome out = execute(spec, cell.variants[job.variant], cell, cfg, prior, sensor);
    const double limit = prior.remaining_budget * (1.0 + 1e-6);
    if (out.spent > limit)
      throw std::runtime_error("run_experiment: policy " + spec.id() + " overspent the budget");
    TrialRecord rec = score_trial(out.decisions, truth.hypothesis, cfg.c);
    rec.policy = spec.id();
    rec.B = cell.B;
    rec.p0 = cell.p0;
    rec.trial = job.trial;
    rec.spent = out.spent;
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    raw[j] = std::move(rec);
  });

  ExperimentResult result;
  std::size_t offset = 0;
  for (const Cell& cell : cells) {
    const std::size_t per_variant = static_cast<std::size_t>(cfg.trials);
    std::size_t best = 0;
    double best_mean = 0.0;
    for (std::size_t v = 0; v < cell.variants.size(); ++v) {
      double sum = 0.0;
      for (std::size_t t = 0; t < per_variant; ++t) sum += raw[offset + v * per_variant + t].errors;
      const double mean = sum / static_cast<double>(per_variant);
      if (v == 0 || mean < best_mean) {
        best = v;
        best_mean = mean;
      }
    }
    const PolicySpec& spec = specs[cell.policy];
    if (spec.is_culling())
      result.selections.push_back({spec.id(), cell.B, cell.p0, cell.variants[best].stages,
                                   cell.variants[best].rho, best_mean});
    for (std::size_t t = 0; t < per_variant; ++t)
      result.records.push_back(std::move(raw[offset + best * per_variant + t]));
    offset += cell.variants.size() * per_variant;
  }
  return result;
}

std::vector<SweepRow> summarize(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  std::vector<SweepRow> rows;
  std::map<std::tuple<std::string, double, double>, std::size_t> index;
  std::vector<std::vector<double>> samples;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.policy, r.B, r.p0);
    auto [it, inserted] = index.try_emplace(key, rows.size());
    if (inserted) {
      rows.push_back({r.policy, r.B, r.p0, 0.0, 0.0, 0});
      samples.emplace_back();
    }
    samples[it->second].push_back(static_cast<double>(r.errors));
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& xs = samples[k];
    const double m = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= m;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    rows[k].mean_errors = mean;
    rows[k].std_err = xs.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
    rows[k].trials = static_cast<int>(xs.size());
  }
  return rows;
}

}  // namespace adaptive_alloc
