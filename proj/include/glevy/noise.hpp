#pragma once

// The base probability space: Brownian increments on a grid plus a unit-rate
// Poisson stream of jump events marked by base-measure atoms. Everything here
// is a pure function of (grid, base measure, seed, stream); controls map the
// base marks through their measure's transport map at integration time, so
// one realization batch serves every candidate control (common random
// numbers).

#include <glevy/rng.hpp>
#include <glevy/types.hpp>
#include <glevy/uncertainty.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace glevy {

struct JumpEvent {
  double time;
  int mark;  // atom index of the base measure
};

struct NoiseRealization {
  int n_steps = 0;
  int dim = 0;
  uint64_t seed = 0;
  uint64_t stream = 0;
  std::vector<double> brownian;  // n_steps x dim, row-major; entries ~ N(0, dt)
  std::vector<JumpEvent> jumps;  // strictly increasing times in (t0, T]

  const double* increments(int step) const { return brownian.data() + std::size_t(step) * dim; }
};

/// Draw order is fixed: all Brownian increments first (step-major), then the
/// jump stream with each accepted time immediately followed by its mark.
NoiseRealization sample_noise(const TimeGrid& grid, const JumpMeasure& base, uint64_t seed,
                              uint64_t stream = 0);

// Binary dump, little-endian throughout:
//   bytes 0..7   magic "GLEVYNZ1"
//   u64 seed, u64 stream
//   f64 t0, f64 T, u32 n_steps, u32 dim
//   u64 n_jumps
//   n_steps*dim f64 Brownian increments (step-major)
//   per jump: f64 time, u32 mark
void write_noise(std::ostream& os, const NoiseRealization& noise, const TimeGrid& grid);
struct NoiseDump {
  NoiseRealization noise;
  TimeGrid grid;
};
NoiseDump read_noise(std::istream& is);

/// Sampled driven process under one control. Stored flat; events are the grid
/// nodes plus the exact jump times, in time order, starting at (t0, zeros).
struct DrivenPath {
  int dim = 1;
  std::vector<double> times;
  std::vector<uint8_t> jump_flag;
  std::vector<double> b;          // full Levy-Ito integral, n_events x dim
  std::vector<double> b_cont;     // continuous part only: ∫p ds + ∫Q dW
  std::vector<double> cov;        // accumulated covariation, n_events x dim*dim
  std::vector<double> jump_mark;  // mapped mark (zeros at non-jump events)

  std::size_t size() const { return times.size(); }
  double b_terminal(int c = 0) const { return b[(size() - 1) * dim + c]; }
  double b_cont_terminal(int c = 0) const { return b_cont[(size() - 1) * dim + c]; }
  /// Index of the last event with time <= t (cadlag sampling).
  std::size_t index_at(double t) const;
  double b_at(double t, int c = 0) const { return b[index_at(t) * dim + c]; }
  double b_cont_at(double t, int c = 0) const { return b_cont[index_at(t) * dim + c]; }
};

/// Integrates  p dt + Q dW  plus the mapped jumps along one realization.
/// Within a step, the Brownian increment is apportioned linearly so that jump
/// times see the continuous part advanced to their exact position; node
/// values are unaffected. Control switch times must lie on grid nodes.
DrivenPath levy_ito_integral(const ControlPath& control, const NoiseRealization& noise,
                             const UncertaintySet& set, const TimeGrid& grid);

/// Cadlag step path: value on [times[i], times[i+1]).
struct SteppedPath {
  std::vector<double> times;
  std::vector<double> values;

  double at(double t) const;
  double terminal() const { return values.back(); }
  double sup_abs() const;
};

/// Pathwise integral against the jump measure of the driven process: the
/// running sum of field(u, mapped mark) over jump events.
SteppedPath jump_integral(const std::function<double(double, const Vec&)>& field,
                          const ControlPath& control, const NoiseRealization& noise,
                          const UncertaintySet& set, const TimeGrid& grid);

/// Maps each control switch time to its grid node index; throws
/// std::invalid_argument when a switch time is off-grid.
std::vector<int> control_node_indices(const ControlPath& control, const TimeGrid& grid);

}  // namespace glevy
