#pragma once

// The ambiguity set: finitely many (jump measure, drift, volatility) triples,
// plus the piecewise-constant controls that select a triple over time.
//
// Jump measures are finite discrete with unit total mass. Every measure must
// be reachable from the distinguished base measure by an atom-level transport
// map (equal atom counts, matching weight multisets); simulation draws marks
// from the base measure and pushes them forward through that map.

#include <glevy/types.hpp>

#include <functional>
#include <vector>

namespace glevy {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kPsdEigenvalueFloor = -1e-10;

struct JumpMeasure {
  std::vector<Vec> points;      // atom locations, all nonzero
  std::vector<double> weights;  // nonnegative, sum to 1

  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  std::size_t size() const { return points.size(); }

  /// First absolute moment of the measure.
  double mean_abs() const;
};

/// Atom-level transport from the base measure: assignment[i] is the target
/// atom receiving base atom i. The pushforward of the base weights must
/// reproduce the target weights.
struct JumpMap {
  std::vector<int> assignment;
};

/// Construct the transport map onto `target`; throws std::invalid_argument
/// when no weight-preserving assignment exists.
JumpMap make_transport_map(const JumpMeasure& base, const JumpMeasure& target);

struct UncertaintySet {
  std::vector<JumpMeasure> jump_measures;
  std::vector<Vec> drifts;
  std::vector<Mat> volatilities;
  int base_measure_index = 0;
  std::vector<JumpMap> transport;  // one per jump measure; built by finalize()

  int dim() const;
  const JumpMeasure& base_measure() const { return jump_measures.at(base_measure_index); }
  std::size_t n_triples() const {
    return jump_measures.size() * drifts.size() * volatilities.size();
  }

  /// Builds the transport maps from the base measure; throws when they do not
  /// exist. Must be called once after the fields are filled in.
  void finalize();

  /// Target atom of base atom `atom` under measure `measure`.
  const Vec& mapped_point(int measure, int atom) const {
    return jump_measures[measure].points[transport[measure].assignment[atom]];
  }
};

struct ValidationReport {
  bool pass = false;
  /// max over triples of  ∫|z| v(dz) + |p| + tr(Q Q^T)  (finite by construction;
  /// reported so configs can be compared).
  double moment_bound = 0.0;
  std::vector<double> masses;
  std::vector<double> mean_abs_jump;
  std::vector<bool> symmetric;
  std::vector<bool> psd;
  std::vector<bool> strictly_pd;
  bool has_degenerate_volatility = false;  // PSD but not strictly definite
  std::vector<std::string> errors;
};

/// Pure check of the set's invariants: unit masses (1e-12), no atom at the
/// origin, symmetric PSD volatilities (eigenvalue floor -1e-10), transport
/// maps well defined. Never throws.
ValidationReport validate(const UncertaintySet& set);

/// A test function with enough local data at the origin to evaluate the
/// Levy-Khintchine form: f itself (f(0)=0), its gradient and Hessian at 0.
struct TestFunction {
  std::function<double(const Vec&)> value;
  Vec gradient0;
  Mat hessian0;
};

/// sup over triples of  ∫ f dv + <Df(0), p> + 1/2 tr(D^2 f(0) Q Q^T).
/// Exact finite maximum; scales positively-homogeneously with f.
double levy_khintchine_functional(const TestFunction& f, const UncertaintySet& set);

struct TripleIndex {
  int measure = 0;
  int drift = 0;
  int vol = 0;
  bool operator==(const TripleIndex&) const = default;
};

/// Piecewise-constant control: triples[k] applies on (times[k], times[k+1]].
struct ControlPath {
  std::vector<double> times;
  std::vector<TripleIndex> triples;
  std::string id;

  double t0() const { return times.front(); }
  double T() const { return times.back(); }

  /// Interval index k with times[k] < t <= times[k+1], clamped at the ends.
  int interval_at(double t) const;

  /// Throws std::invalid_argument on malformed times or out-of-range indices.
  void validate_against(const UncertaintySet& set) const;
};

/// All constant-in-time controls over [t0, T], one per triple, deduplicated.
std::vector<ControlPath> extreme_controls(const UncertaintySet& set, const TimeGrid& grid);

// JSON document round trip. Schema:
//   {"d": int,
//    "measures": [{"atoms": [[[z...], w], ...]}, ...],
//    "drifts": [[...], ...],
//    "vols": [[[...], ...], ...],
//    "base": int}
std::string to_json_string(const UncertaintySet& set, int indent = -1);
UncertaintySet uncertainty_from_json(const std::string& text);
UncertaintySet load_uncertainty(const std::string& path);

}  // namespace glevy
