#pragma once

// Minimum Bayes risk of deciding between two Gaussians
//
//   R = integral of min{(1 - p) f0(y), c p f1(y)} dy,
//   f0 = N(0, Sigma0), f1 = N(mu, Sigma1), Sigma0 <= Sigma1,
//
// in closed form through the standard normal CDF. When the variances differ
// the null decision region is an interval bounded by the roots of a quadratic
// (or empty when its discriminant is negative); when they coincide it is a
// half-line.

#include "adaptive_alloc/core_model.hpp"

namespace adaptive_alloc {

/// Standard normal CDF, evaluated through erfc.
double gaussian_cdf(double z);
/// Inverse of gaussian_cdf on (0, 1).
double gaussian_quantile(double prob);

/// Parameters of one test's risk at resource u. Means enter only through
/// their difference mu_diff = mu1 - mu0. u = 0 means "no observation".
struct RiskParams {
  double p = 0.5;
  double c = 1.0;
  double mu_diff = 1.0;
  double var0 = 0.0;
  double var1 = 0.0;
  double nu2 = 1.0;
  double u = 1.0;

  static RiskParams from_belief(const TestBelief& b, double nu2, double u, double c);

  double sigma0() const { return var0 + nu2 / u; }
  double sigma1() const { return var1 + nu2 / u; }
  void validate() const;
};

/// Null decision region, in coordinates where the null mean is 0.
struct DecisionRegion {
  enum class Kind {
    Interval,        ///< [lo, hi]
    Empty,           ///< always decide H = 1
    Everything,      ///< always decide H = 0
    BelowThreshold,  ///< (-inf, hi]
    AboveThreshold,  ///< [lo, inf)
  };
  Kind kind = Kind::Empty;
  double lo = 0.0;
  double hi = 0.0;
  double discriminant = 0.0;  ///< only meaningful for unequal variances

  bool contains(double y) const;
};

/// Closed-form risk for predictive variances sigma0 <= sigma1 (both > 0).
double bayes_risk_predictive(double p, double c, double mu_diff, double sigma0,
                             double sigma1);

/// Risk at resource u; u = 0 gives min{1 - p, c p}.
double bayes_risk(const RiskParams& params);

DecisionRegion decision_regions_predictive(double p, double c, double mu_diff,
                                           double sigma0, double sigma1);
/// Requires u > 0.
DecisionRegion decision_regions(const RiskParams& params);

/// Risk of one test as a function of u, with the per-test constants hoisted.
/// Used in the allocator's inner loops; input is validated once at
/// construction.
class RiskCurve {
 public:
  RiskCurve() = default;
  RiskCurve(const TestBelief& belief, double nu2, double c);

  double operator()(double u) const;
  /// Risk without observation, min{1 - p, c p}.
  double at_zero() const { return r0_; }

 private:
  double p_ = 0.5;
  double c_ = 1.0;
  double mu_ = 1.0;
  double var0_ = 0.0;
  double var1_ = 0.0;
  double nu2_ = 1.0;
  double log_odds_ = 0.0;
  double r0_ = 0.5;
  bool degenerate_ = false;
};

}  // namespace adaptive_alloc
