#pragma once

// Random streams and the simulated sensor.
//
// Every random quantity is a pure function of (seed, key...), so a draw does
// not depend on the order in which trials or tests are processed. Ground truth
// is keyed by (trial, test); observation noise by (trial, test, stage).

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "adaptive_alloc/core_model.hpp"

namespace adaptive_alloc {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t bits(std::initializer_list<std::uint64_t> key) const;
  /// Uniform on the open interval (0, 1).
  double uniform(std::initializer_list<std::uint64_t> key) const;
  /// Standard normal by inversion of the uniform draw for the same key.
  double normal(std::initializer_list<std::uint64_t> key) const;

  /// Independent generator for a named sub-purpose.
  CounterRng derive(std::initializer_list<std::uint64_t> key) const {
    return CounterRng(bits(key));
  }

 private:
  std::uint64_t seed_;
};

/// Stable 64-bit encoding of a double for use inside RNG keys.
std::uint64_t key_of(double value);

struct GroundTruth {
  std::vector<int> hypothesis;
  std::vector<double> x;
};

/// H_i ~ Bernoulli(p0), x_i | H_i ~ N(mu^H, var^H), independent over i.
GroundTruth sample_truth(const TestPrior& prior, std::size_t n, const CounterRng& rng,
                         std::uint64_t trial);

/// Per-test version drawing from each belief (H ~ Bernoulli(p), x ~ N(mu^H, var^H)).
GroundTruth sample_truth(const std::vector<TestBelief>& beliefs, const CounterRng& rng,
                         std::uint64_t trial);

/// y_i ~ N(x_i, nu2 / u_i) where u_i > 0, absent otherwise. `branch`
/// separates replicate futures that share the same trial history.
Observations sample_obs(const std::vector<double>& x, const Allocation& alloc, double nu2,
                        const CounterRng& rng, std::uint64_t trial, int stage,
                        std::uint64_t branch = 0);

/// Source of observations for a policy. Policies never see the ground truth.
class ObservationSource {
 public:
  virtual ~ObservationSource() = default;
  virtual Observations observe(int stage, const Allocation& alloc) = 0;
};

class SimulatedSensor final : public ObservationSource {
 public:
  SimulatedSensor(std::vector<double> x, double nu2, CounterRng rng, std::uint64_t trial,
                  std::uint64_t branch = 0)
      : x_(std::move(x)), nu2_(nu2), rng_(rng), trial_(trial), branch_(branch) {}

  Observations observe(int stage, const Allocation& alloc) override;

  /// Stage 0 noise is shared by every branch; later stages are branch-specific.
  void set_branch(std::uint64_t branch) { branch_ = branch; }

 private:
  std::vector<double> x_;
  double nu2_;
  CounterRng rng_;
  std::uint64_t trial_;
  std::uint64_t branch_;
};

}  // namespace adaptive_alloc
