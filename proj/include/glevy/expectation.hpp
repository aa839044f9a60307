#pragma once

// Worst-case (sublinear) expectation estimation: maximize the Monte Carlo
// mean over a searched family of piecewise-constant controls. Every candidate
// control is evaluated against the same noise batch (common random numbers),
// which makes the sub-additivity and homogeneity properties hold per batch
// and slashes comparison variance. Values are lower bounds of the true
// supremum: the searched family is a strict subset of all adapted controls.

#include <glevy/batch.hpp>
#include <glevy/noise.hpp>
#include <glevy/sde.hpp>
#include <glevy/types.hpp>
#include <glevy/uncertainty.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace glevy {

struct PathFunctional {
  std::string name;
  bool terminal_only = false;
  std::function<double(const DrivenPath&)> eval;
};

struct StateFunctional {
  std::string name;
  bool terminal_only = false;
  std::function<double(const SdePath&)> eval;
};

struct ControlEstimate {
  std::string control_id;
  double mean = 0.0;
  double std_error = 0.0;
  uint64_t n_paths = 0;
  uint64_t n_divergent = 0;
};

struct SublinearEstimate {
  double value = 0.0;
  std::string argmax_id;
  double std_error = 0.0;  // at the argmax control
  std::vector<ControlEstimate> table;
  bool is_lower_bound = true;
  bool tainted = false;  // > 0.1% of path evaluations diverged
  uint64_t n_divergent_total = 0;
};

struct SearchSpec {
  enum class Kind { extremes, coordinate_ascent };
  Kind kind = Kind::extremes;
  int k_intervals = 4;
  int n_rounds = 3;
};

struct EstimateOptions {
  uint64_t n_paths = 1000;
  uint64_t seed = 0;
  SearchSpec search;
  Exec exec = Exec::parallel;
};

/// eval(control, path_index) -> functional value for that path; throw
/// DivergenceError (or return NaN) for divergent paths.
using PathEvaluator = std::function<double(const ControlPath&, uint64_t)>;

SublinearEstimate estimate_core(const PathEvaluator& eval, const UncertaintySet& set,
                                const TimeGrid& grid, const EstimateOptions& opts);

SublinearEstimate estimate_sublinear(const PathFunctional& xi, const UncertaintySet& set,
                                     const TimeGrid& grid, const EstimateOptions& opts);

SublinearEstimate estimate_sublinear(const StateFunctional& xi, const Coefficients& coeffs,
                                     const Vec& y0, const UncertaintySet& set,
                                     const TimeGrid& grid, const EstimateOptions& opts);

/// Capacity of a path event: worst-case empirical frequency over controls.
SublinearEstimate capacity_estimate(const PathFunctional& event, const UncertaintySet& set,
                                    const TimeGrid& grid, const EstimateOptions& opts);

struct MarkovRow {
  double M = 0.0;
  double capacity = 0.0;
  double bound = 0.0;  // estimated worst-case p-th moment / M^p
  double combined_se = 0.0;
  bool pass = false;
};

/// Chebyshev/Markov-type tail bound check: capacity(|X| > M) against
/// E_hat[|X|^p] / M^p, both over the same control set and noise batch; pass
/// when capacity <= bound + 3 * combined standard error.
std::vector<MarkovRow> markov_bound_check(const PathFunctional& x, double p,
                                          const std::vector<double>& m_list,
                                          const UncertaintySet& set, const TimeGrid& grid,
                                          const EstimateOptions& opts);

struct LatticeSpec {
  double step = 0.01;
  double envelope_sigmas = 6.0;
  double envelope_tail = 1e-9;  // jump mass allowed outside the lattice (clamped)
  int gh_nodes = 64;
  double poisson_tail = 1e-12;  // truncation of the compound-jump mixture
  double interp_budget = 1e-3;  // relative to 1 + max|values|
};

struct LatticeTooCoarse : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Backward dynamic-programming evaluation of the worst-case expectation of
/// phi(increment_1, ..., increment_k) over [t0, t_1], ..., (t_{k-1}, t_k].
/// Scalar state (d = 1), k <= 3. At every lattice state the triple is chosen
/// by exact enumeration; the Gaussian part is integrated by Gauss-Hermite
/// quadrature composed with the exact compound-jump distribution.
double iterated_expectation(const std::function<double(std::span<const double>)>& phi, double t0,
                            const std::vector<double>& times, const UncertaintySet& set,
                            const LatticeSpec& lattice = {});

enum class BdgKind { jump, brownian, covariation };

/// Elementary step-in-time factor: value[k] on [times[k], times[k+1]).
struct StepFunction {
  std::vector<double> times;   // breakpoints, increasing; must cover the grid
  std::vector<double> values;  // one fewer than times
  double at(double t) const;
  double integral_sq() const;  // ∫ f(t)^2 dt over [times.front(), times.back()]
};

struct BdgSpec {
  StepFunction time_factor;                    // F (jump kind) or eta (other kinds)
  std::function<double(const Vec&)> mark_factor;  // psi, jump kind only
};

struct BdgResult {
  double lhs = 0.0;    // estimated worst-case E[sup_t |integral|^2]
  double rhs = 0.0;    // right-hand side without the reference constant
  double ratio = 0.0;  // lhs / rhs (0 when both vanish)
};

/// Empirical second-moment maximal-inequality check (p = 2). Reference
/// constants for the comparison: jump 2(T+4), Brownian 4, covariation 4.
BdgResult bdg_check(BdgKind kind, const BdgSpec& spec, const UncertaintySet& set,
                    const TimeGrid& grid, uint64_t n_paths, uint64_t seed,
                    Exec exec = Exec::parallel);

inline double bdg_reference_constant(BdgKind kind, double T) {
  switch (kind) {
    case BdgKind::jump: return 2.0 * (T + 4.0);
    default: return 4.0;
  }
}

}  // namespace glevy
