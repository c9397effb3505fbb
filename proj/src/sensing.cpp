#include "adaptive_alloc/sensing.hpp"

#include <bit>
#include <cmath>

#include "adaptive_alloc/bayes_risk.hpp"

namespace adaptive_alloc {

namespace {
constexpr std::uint64_t kTagHypothesis = 0x4879706f74686573ULL;
constexpr std::uint64_t kTagLatent = 0x4c6174656e74ULL;
constexpr std::uint64_t kTagNoise = 0x4e6f697365ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::initializer_list<std::uint64_t> key) const {
  std::uint64_t h = mix64(seed_ ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t k : key) h = mix64(h ^ mix64(k + 0x3c6ef372fe94f82bULL));
  return h;
}

double CounterRng::uniform(std::initializer_list<std::uint64_t> key) const {
  return (static_cast<double>(bits(key) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::initializer_list<std::uint64_t> key) const {
  return gaussian_quantile(uniform(key));
}

std::uint64_t key_of(double value) { return std::bit_cast<std::uint64_t>(value); }

GroundTruth sample_truth(const TestPrior& prior, std::size_t n, const CounterRng& rng,
                         std::uint64_t trial) {
  return sample_truth(std::vector<TestBelief>(n, TestBelief::from_prior(prior)), rng, trial);
}

GroundTruth sample_truth(const std::vector<TestBelief>& beliefs, const CounterRng& rng,
                         std::uint64_t trial) {
  const std::size_t n = beliefs.size();
  GroundTruth truth;
  truth.hypothesis.resize(n);
  truth.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TestBelief& b = beliefs[i];
    const int h = rng.uniform({kTagHypothesis, trial, i}) < b.p ? 1 : 0;
    truth.hypothesis[i] = h;
    const double mean = h ? b.mu1 : b.mu0;
    const double var = h ? b.var1 : b.var0;
    truth.x[i] = var > 0.0 ? mean + std::sqrt(var) * rng.normal({kTagLatent, trial, i}) : mean;
  }
  return truth;
}

Observations sample_obs(const std::vector<double>& x, const Allocation& alloc, double nu2,
                        const CounterRng& rng, std::uint64_t trial, int stage,
                        std::uint64_t branch) {
  alloc.validate();
  Observations y(x.size());
  const auto st = static_cast<std::uint64_t>(stage);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = alloc.u.at(i);
    if (u > 0.0) y[i] = x[i] + std::sqrt(nu2 / u) * rng.normal({kTagNoise, trial, i, st, branch});
  }
  return y;
}

Observations SimulatedSensor::observe(int stage, const Allocation& alloc) {
  return sample_obs(x_, alloc, nu2_, rng_, trial_, stage, stage == 0 ? 0 : branch_);
}

}  // namespace adaptive_alloc
