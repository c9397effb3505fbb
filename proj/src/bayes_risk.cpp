#include "adaptive_alloc/bayes_risk.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace adaptive_alloc {

namespace {

constexpr double kEqualVarianceRel = 1e-12;
constexpr double kDiscriminantClamp = 1e-14;

// Probability that N(0,1) falls in [a, b], accurate in both tails.
double normal_mass(double a, double b) {
  if (b <= a) return 0.0;
  if (a > 0.0) return std::max(0.0, gaussian_cdf(-a) - gaussian_cdf(-b));
  return std::max(0.0, gaussian_cdf(b) - gaussian_cdf(a));
}

bool near_equal(double s0, double s1) { return s1 - s0 <= kEqualVarianceRel * s1; }

struct Roots {
  double discriminant;
  double lo;
  double hi;
};

// Roots of (s1 - s0) y^2 + 2 s0 mu y - s0 (mu^2 + s1 (log(s1/s0) + 2 L)) = 0
// for mu >= 0, via the cancellation-free form of the quadratic formula.
Roots unequal_roots(double mu, double s0, double s1, double log_odds) {
  const double gap = s1 - s0;
  const double log_ratio = std::log1p(gap / s0);
  double d = mu * mu + gap * (log_ratio + 2.0 * log_odds);
  if (std::abs(d) < kDiscriminantClamp) d = 0.0;
  if (d < 0.0) return {d, 0.0, 0.0};

  const double half_b = s0 * mu;
  const double c0 = -s0 * (mu * mu + s1 * (log_ratio + 2.0 * log_odds));
  const double q = -(half_b + std::sqrt(s0 * s1 * d));
  double r1 = q / gap;
  double r2 = q != 0.0 ? c0 / q : 0.0;
  if (q == 0.0) r1 = 0.0;
  return {d, std::min(r1, r2), std::max(r1, r2)};
}

double risk_core(double w0, double w1, double log_odds, double mu, double s0,
                 double s1) {
  mu = std::abs(mu);  // reflection y -> -y leaves the risk unchanged
  if (near_equal(s0, s1)) {
    if (mu == 0.0) return std::min(w0, w1);
    const double sd = std::sqrt(s1);
    const double a = mu / (2.0 * sd);
    const double b = sd / mu * log_odds;
    return w0 * gaussian_cdf(-a - b) + w1 * gaussian_cdf(-a + b);
  }
  const Roots r = unequal_roots(mu, s0, s1, log_odds);
  if (r.discriminant < 0.0) return w0;
  const double sd0 = std::sqrt(s0);
  const double sd1 = std::sqrt(s1);
  const double type1 = gaussian_cdf(r.lo / sd0) + gaussian_cdf(-r.hi / sd0);
  const double type2 = normal_mass((r.lo - mu) / sd1, (r.hi - mu) / sd1);
  return w0 * std::min(1.0, type1) + w1 * type2;
}

void check_predictive(double p, double c, double mu, double s0, double s1) {
  if (!std::isfinite(p) || !std::isfinite(c) || !std::isfinite(mu) ||
      !std::isfinite(s0) || !std::isfinite(s1))
    throw std::invalid_argument("bayes risk: non-finite parameter");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("bayes risk: p outside [0, 1]");
  if (!(c > 0.0)) throw std::invalid_argument("bayes risk: c must be positive");
  if (!(s0 > 0.0)) throw std::invalid_argument("bayes risk: Sigma0 must be positive");
  if (s0 > s1) throw std::invalid_argument("bayes risk: requires Sigma0 <= Sigma1");
}

}  // namespace

double gaussian_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double gaussian_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("gaussian_quantile: need 0 < p < 1");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
}

RiskParams RiskParams::from_belief(const TestBelief& b, double nu2, double u, double c) {
  return {b.p, c, b.mu1 - b.mu0, b.var0, b.var1, nu2, u};
}

void RiskParams::validate() const {
  if (!std::isfinite(p) || !std::isfinite(c) || !std::isfinite(mu_diff) ||
      !std::isfinite(var0) || !std::isfinite(var1) || !std::isfinite(nu2) ||
      !std::isfinite(u))
    throw std::invalid_argument("RiskParams: non-finite parameter");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("RiskParams: p outside [0, 1]");
  if (!(c > 0.0)) throw std::invalid_argument("RiskParams: c must be positive");
  if (var0 < 0.0 || var1 < 0.0) throw std::invalid_argument("RiskParams: negative variance");
  if (var0 > var1) throw std::invalid_argument("RiskParams: requires var0 <= var1");
  if (!(nu2 > 0.0)) throw std::invalid_argument("RiskParams: nu2 must be positive");
  if (u < 0.0) throw std::invalid_argument("RiskParams: negative resource");
}

double bayes_risk_predictive(double p, double c, double mu_diff, double sigma0,
                             double sigma1) {
  check_predictive(p, c, mu_diff, sigma0, sigma1);
  if (p == 0.0 || p == 1.0) return 0.0;
  const double w0 = 1.0 - p;
  const double w1 = c * p;
  return risk_core(w0, w1, std::log(w0 / w1), mu_diff, sigma0, sigma1);
}

double bayes_risk(const RiskParams& params) {
  params.validate();
  if (params.p == 0.0 || params.p == 1.0) return 0.0;
  if (params.u == 0.0) return std::min(1.0 - params.p, params.c * params.p);
  return bayes_risk_predictive(params.p, params.c, params.mu_diff, params.sigma0(),
                               params.sigma1());
}

bool DecisionRegion::contains(double y) const {
  switch (kind) {
    case Kind::Interval: return y >= lo && y <= hi;
    case Kind::Empty: return false;
    case Kind::Everything: return true;
    case Kind::BelowThreshold: return y <= hi;
    case Kind::AboveThreshold: return y >= lo;
  }
  return false;
}

DecisionRegion decision_regions_predictive(double p, double c, double mu_diff,
                                           double sigma0, double sigma1) {
  check_predictive(p, c, mu_diff, sigma0, sigma1);
  using K = DecisionRegion::Kind;
  if (p == 0.0) return {K::Everything};
  if (p == 1.0) return {K::Empty};
  const double w0 = 1.0 - p;
  const double w1 = c * p;
  const double log_odds = std::log(w0 / w1);

  if (near_equal(sigma0, sigma1)) {
    if (mu_diff == 0.0) return {w0 >= w1 ? K::Everything : K::Empty};
    const double yc = mu_diff / 2.0 + sigma1 / mu_diff * log_odds;
    if (mu_diff > 0.0) return {K::BelowThreshold, 0.0, yc};
    return {K::AboveThreshold, yc, 0.0};
  }
  const Roots r = unequal_roots(std::abs(mu_diff), sigma0, sigma1, log_odds);
  if (r.discriminant < 0.0) return {K::Empty, 0.0, 0.0, r.discriminant};
  if (mu_diff >= 0.0) return {K::Interval, r.lo, r.hi, r.discriminant};
  return {K::Interval, -r.hi, -r.lo, r.discriminant};
}

DecisionRegion decision_regions(const RiskParams& params) {
  params.validate();
  if (!(params.u > 0.0)) throw std::invalid_argument("decision_regions: requires u > 0");
  return decision_regions_predictive(params.p, params.c, params.mu_diff, params.sigma0(),
                                     params.sigma1());
}

RiskCurve::RiskCurve(const TestBelief& belief, double nu2, double c)
    : p_(belief.p),
      c_(c),
      mu_(std::abs(belief.mu1 - belief.mu0)),
      var0_(belief.var0),
      var1_(belief.var1),
      nu2_(nu2) {
  RiskParams{belief.p, c, belief.mu1 - belief.mu0, belief.var0, belief.var1, nu2, 0.0}
      .validate();
  degenerate_ = p_ == 0.0 || p_ == 1.0;
  r0_ = degenerate_ ? 0.0 : std::min(1.0 - p_, c_ * p_);
  if (!degenerate_) log_odds_ = std::log((1.0 - p_) / (c_ * p_));
}

double RiskCurve::operator()(double u) const {
  if (degenerate_) return 0.0;
  if (!(u > 0.0)) return r0_;
  const double noise = nu2_ / u;
  return risk_core(1.0 - p_, c_ * p_, log_odds_, mu_, var0_ + noise, var1_ + noise);
}

}  // namespace adaptive_alloc
