#pragma once

// Worst-case Lyapunov analysis. The operator applied to V is
//
//   LV(t,y) = V_t + <V_y, b>
//           + max_Q tr[ (<V_y, h_ij> + 1/2 <V_yy sigma_i, sigma_j>)_{ij} QQ^T ]
//           + max_v sum_i w_i [ V(t, y + K(t,y,z_i)) - V(t,y) ]
//
// with exact finite maxima over the ambiguity set. Certification samples a
// user domain with a low-discrepancy sequence (plus corners and axis points)
// and checks the decay conditions pointwise with a 1e-9 absolute slack.

#include <glevy/batch.hpp>
#include <glevy/sde.hpp>
#include <glevy/types.hpp>
#include <glevy/uncertainty.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace glevy {

struct LyapunovFunction {
  std::function<double(double, const Vec&)> V;
  std::function<double(double, const Vec&)> V_t;
  std::function<Vec(double, const Vec&)> V_y;
  std::function<Mat(double, const Vec&)> V_yy;

  /// V(t, y) = |y|^2 with analytic derivatives.
  static LyapunovFunction quadratic(int n);
  /// Derivatives by central finite differences of the supplied value function.
  static LyapunovFunction from_value(std::function<double(double, const Vec&)> value,
                                     int n, double fd_step = 1e-5);
};

/// Finite-difference consistency of the supplied derivatives at the given
/// points (relative tolerance, default 1e-4 at step 1e-5).
bool derivatives_consistent(const LyapunovFunction& V, double t, const Vec& y,
                            double rel_tol = 1e-4, double step = 1e-5);

double lv_operator(const LyapunovFunction& V, const Coefficients& coeffs,
                   const UncertaintySet& set, double t, const Vec& y);

struct Domain {
  double t_lo = 0.0, t_hi = 1.0;
  Vec y_lo, y_hi;
};

struct EnvelopeCheck {
  bool pass = false;
  double worst_gap = 0.0;  // most negative slack seen
  double witness_t = 0.0;
  Vec witness_y;
};

/// Samples the domain and checks c_lower |y|^2 <= V(t,y) <= c_upper |y|^2
/// (1e-12 slack); fails with a witness on the first violation found.
EnvelopeCheck check_quadratic_envelope(const LyapunovFunction& V, double c_lower, double c_upper,
                                       const Domain& domain, std::size_t n_samples,
                                       Exec exec = Exec::parallel);

enum class Verdict { pass, fail, not_checked };
const char* to_string(Verdict v);

struct StabilityCertificate {
  Verdict mean_square = Verdict::not_checked;               // LV <= -lambda V
  Verdict mean_square_time_varying = Verdict::not_checked;  // LV <= (-lambda + lambda1(t)) V
  Verdict quasi_sure = Verdict::not_checked;                // + squared-coefficient growth bound
  bool envelope_ok = false;

  double decay_rate = 0.0;
  double c_lower = 0.0, c_upper = 0.0;
  double alpha = 0.0;                // growth constant (condition on |b|^2+...)
  bool alpha_checked = false;
  double lambda1_integral = 0.0;     // ∫ lambda1^+ over [t_lo, horizon]
  double growth_factor = 1.0;        // exp(lambda1_integral); multiplies c_upper/c_lower
  double horizon = 0.0;
  double predicted_ms_coefficient = 0.0;  // E|Y_t|^2 <= coeff * E|Y_0|^2 * exp(-rate (t - t0))
  double predicted_qs_exponent = 0.0;     // limsup ln|Y_t| / t <= this
  std::size_t n_samples = 0;
  Domain domain;

  struct Witness {
    bool present = false;
    std::string condition;
    double t = 0.0;
    Vec y;
    double lhs = 0.0, rhs = 0.0;
  };
  Witness witness;

  bool all_requested_pass() const;
  std::string to_json_string(int indent = 2) const;
};

struct CertifySpec {
  double decay_rate = 0.0;
  double c_lower = 1.0, c_upper = 1.0;
  std::function<double(double)> lambda1;  // empty: check the constant-rate condition
  std::optional<double> alpha;            // present: also check the growth condition
  Domain domain;
  double horizon = 0.0;  // for ∫ lambda1^+; defaults to domain.t_hi when 0
  std::size_t n_samples = 100000;
  Exec exec = Exec::parallel;
};

StabilityCertificate certify(const LyapunovFunction& V, const Coefficients& coeffs,
                             const UncertaintySet& set, const CertifySpec& spec);

struct DecayFit {
  double decay_rate = 0.0;  // = -slope of log E|Y_t|^2
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares line through (t, log m(t)); throws std::invalid_argument on
/// nonpositive values (suggesting more paths) or fewer than 10 points.
DecayFit decay_fit(std::span<const double> times, std::span<const double> mean_square);

struct QuasiSureRates {
  std::vector<double> exponents;  // ln|Y_T| / T per nonzero sample
  std::size_t n_zero = 0;         // samples with Y_T = 0, counted as converged
  std::size_t n_exceed = 0;
  double threshold = 0.0;         // -(decay_rate - eps) / 2
  double exceed_fraction = 0.0;   // n_exceed / total samples
};

QuasiSureRates quasi_sure_rate(std::span<const double> terminal_norms, double T,
                               double decay_rate, double eps);
QuasiSureRates quasi_sure_rate(std::span<const SdePath> paths, double decay_rate, double eps);

}  // namespace glevy
