#include <glevy/batch_runs.hpp>

#include <glevy/numerics.hpp>

#include <cmath>
#include <limits>

namespace glevy {

std::vector<int> checkpoint_nodes(const TimeGrid& grid, int n_checkpoints) {
  if (n_checkpoints < 2) throw std::invalid_argument("need at least 2 checkpoints");
  n_checkpoints = std::min(n_checkpoints, grid.n_steps + 1);
  std::vector<int> nodes;
  nodes.reserve(n_checkpoints);
  for (int k = 0; k < n_checkpoints; ++k) {
    int node = static_cast<int>(std::llround(double(k) * grid.n_steps / (n_checkpoints - 1)));
    if (!nodes.empty() && node <= nodes.back()) node = nodes.back() + 1;
    nodes.push_back(std::min(node, grid.n_steps));
  }
  return nodes;
}

MeanSquareBatch simulate_mean_square(const Coefficients& coeffs, const UncertaintySet& set,
                                     const std::vector<ControlPath>& controls,
                                     const TimeGrid& grid, int n_checkpoints, const Vec& y0,
                                     uint64_t n_paths, uint64_t seed, Exec exec) {
  const std::vector<int> nodes = checkpoint_nodes(grid, n_checkpoints);
  const std::size_t n_cp = nodes.size();
  const std::size_t n_ctl = controls.size();

  MeanSquareBatch out;
  out.checkpoint_times.reserve(n_cp);
  for (int node : nodes) out.checkpoint_times.push_back(grid.node(node));

  std::vector<ControlTable> tables;
  tables.reserve(n_ctl);
  for (const ControlPath& control : controls) tables.push_back(compile_control(control, set, grid));

  const JumpMeasure& base = set.base_measure();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // One noise draw per path, shared by every control (common random numbers).
  std::vector<double> samples(n_paths * n_ctl * n_cp);
  parallel_for(n_paths, exec, [&](std::size_t k) {
    thread_local EulerWorkspace ws;
    const NoiseRealization noise = sample_noise(grid, base, seed, k);
    for (std::size_t ci = 0; ci < n_ctl; ++ci) {
      double* row = samples.data() + (k * n_ctl + ci) * n_cp;
      std::size_t cp = 0;
      int node_counter = -1;  // incremented at every non-jump event, t0 included
      try {
        euler_stream(coeffs, tables[ci], noise, y0.data(), grid, ws,
                     [&](double, const double* y, bool is_jump) {
                       if (is_jump) return;
                       ++node_counter;
                       while (cp < n_cp && nodes[cp] == node_counter) {
                         double sq = 0.0;
                         for (int m = 0; m < coeffs.n; ++m) sq += y[m] * y[m];
                         row[cp++] = sq;
                       }
                     });
      } catch (const DivergenceError&) {
        for (std::size_t c = 0; c < n_cp; ++c) row[c] = nan;
      }
    }
  });

  for (std::size_t ci = 0; ci < n_ctl; ++ci) {
    MeanSquareBatch::PerControl pc;
    pc.id = controls[ci].id;
    pc.mean_sq.resize(n_cp);
    pc.std_err.resize(n_cp);
    std::vector<double> column;
    column.reserve(n_paths);
    for (std::size_t c = 0; c < n_cp; ++c) {
      column.clear();
      for (uint64_t k = 0; k < n_paths; ++k) {
        const double v = samples[(k * n_ctl + ci) * n_cp + c];
        if (std::isfinite(v)) column.push_back(v);
      }
      const MeanStderr ms = mean_stderr(column);
      pc.mean_sq[c] = ms.mean;
      pc.std_err[c] = ms.stderr_;
    }
    pc.terminal_norms.reserve(n_paths);
    for (uint64_t k = 0; k < n_paths; ++k) {
      const double v = samples[(k * n_ctl + ci) * n_cp + (n_cp - 1)];
      if (std::isfinite(v))
        pc.terminal_norms.push_back(std::sqrt(v));
      else
        ++pc.n_divergent;
    }
    out.controls.push_back(std::move(pc));
  }

  out.sup_mean_sq.resize(n_cp, -std::numeric_limits<double>::infinity());
  for (const auto& pc : out.controls)
    for (std::size_t c = 0; c < n_cp; ++c)
      out.sup_mean_sq[c] = std::max(out.sup_mean_sq[c], pc.mean_sq[c]);
  return out;
}

}  // namespace glevy
