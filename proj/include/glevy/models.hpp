#pragma once

// Built-in scalar test systems. "example51" is the oscillating-volatility
// linear system with multiplicative jumps K(t,y,z) = R(z) y, R(z) = r sign(z):
//
//   b = -2 y
//   h = -sin^2(t) / (2 (1+t^2)) * y          sigma = (1 + |sin t| / sqrt(1+t^2)) y
//
// Its decay certificate carries the time-varying allowance
// lambda1(t) = 2 |sin t| / sqrt(1+t^2), whose positive-part integral diverges
// (|sin| has positive mean, so the tail behaves like a harmonic series); the
// certificate is therefore reported per finite horizon only. The "_amended"
// variant replaces 1/sqrt(1+t^2) by 1/(1+t^2) in sigma (and rescales h to
// match), giving lambda1(t) = 2 |sin t| / (1+t^2), which is integrable, so
// the unconditional time-varying certificate applies.
//
// "linear_test" is the autonomous system b = -2y, sigma = y, K = 0 with
// decay rate 3 under a unit volatility set.

#include <glevy/sde.hpp>
#include <glevy/types.hpp>
#include <glevy/uncertainty.hpp>

#include <functional>
#include <string>

namespace glevy {

struct ModelBundle {
  std::string name;
  Coefficients coeffs;
  double decay_rate = 0.0;                 // certificate rate for the default set
  std::function<double(double)> lambda1;   // empty for autonomous models
  double alpha = 0.0;                      // growth constant for the quasi-sure condition
  double jump_l = 0.0;  // max_v sum w [(1+R)^2 - 1]
  double jump_k = 0.0;  // max_v sum w R^2
};

/// max_v sum_i w_i [(1 + R(z_i))^2 - 1] over the measure family.
double jump_second_moment_shift(const UncertaintySet& set,
                                const std::function<double(const Vec&)>& R);
/// max_v sum_i w_i R(z_i)^2.
double jump_square_bound(const UncertaintySet& set,
                         const std::function<double(const Vec&)>& R);

ModelBundle make_example51(const UncertaintySet& set, double r);
ModelBundle make_example51_amended(const UncertaintySet& set, double r);
ModelBundle make_linear_test();

/// Positive-atom measure pair with volatility set {0.8, 1.0} and zero drift;
/// the default ambient set for the example51 experiments.
UncertaintySet example51_uncertainty_set();

/// Zero-mean measure pair, drifts {-1, +1}, volatilities {0.5, 1.0}; the
/// default set for the expectation operators.
UncertaintySet default_uncertainty_set();

UncertaintySet linear_test_uncertainty_set();

/// r with sum w [(1+r)^2 - 1] = 1 for positive-atom measures: sqrt(2) - 1.
inline constexpr double kDefaultJumpR = 0.41421356237309515;

}  // namespace glevy
