#pragma once

// Path batches over (control, path-index) pairs. Each path regenerates its
// noise from (seed, path index) and is integrated independently; per-path
// results land in preallocated slots and reductions run afterwards in index
// order, so serial and parallel execution produce identical bytes.

#include <glevy/batch.hpp>
#include <glevy/sde.hpp>

#include <string>
#include <vector>

namespace glevy {

struct MeanSquareBatch {
  std::vector<double> checkpoint_times;
  struct PerControl {
    std::string id;
    std::vector<double> mean_sq;         // per checkpoint, divergent paths excluded
    std::vector<double> std_err;         // per checkpoint
    std::vector<double> terminal_norms;  // |Y_T| per finite path
    uint64_t n_divergent = 0;
  };
  std::vector<PerControl> controls;
  std::vector<double> sup_mean_sq;  // per checkpoint, max over controls
};

/// Simulates n_paths per control with common random numbers and records
/// |Y_t|^2 at `n_checkpoints` evenly spaced grid nodes.
MeanSquareBatch simulate_mean_square(const Coefficients& coeffs, const UncertaintySet& set,
                                     const std::vector<ControlPath>& controls,
                                     const TimeGrid& grid, int n_checkpoints, const Vec& y0,
                                     uint64_t n_paths, uint64_t seed, Exec exec = Exec::parallel);

/// Evenly spaced checkpoint node indices (first = 0, last = n_steps).
std::vector<int> checkpoint_nodes(const TimeGrid& grid, int n_checkpoints);

}  // namespace glevy
