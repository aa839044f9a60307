#pragma once

// Jump-diffusion state equation
//
//   dY = b(t,Y) dt + h_ij(t,Y) d<B^i,B^j> + sigma_i(t,Y) dB^i + ∫ K(t,Y,z) L(dt,dz)
//
// solved under one (control, noise) pair. Under the control's triple
// (v, p, Q) the Brownian coordinate increments are p dt + Q dW, the
// covariation density is QQ^T, and jump marks are the base marks pushed
// through v's transport map.
//
// Scheme: left-point Euler. Continuous coefficients are evaluated once per
// step at the step's left node; jumps are applied at their exact times with
// the continuous part advanced to the jump (linear apportionment of the
// step's Brownian increment). With K = 0 the node values are bit-identical
// to a jump-free run.

#include <glevy/noise.hpp>
#include <glevy/numerics.hpp>
#include <glevy/types.hpp>
#include <glevy/uncertainty.hpp>

#include <cmath>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace glevy {

/// Coefficient callbacks write into caller-owned buffers (no allocation on
/// the hot path). Layouts: b -> n; h -> d*d blocks of n, block (i,j) at
/// offset (i*d+j)*n; sigma -> d blocks of n, block i at offset i*n;
/// jump(t, y, z) -> n with z of length d.
struct Coefficients {
  int n = 1;
  int d = 1;
  std::function<void(double, const double*, double*)> b;
  std::function<void(double, const double*, double*)> h;
  std::function<void(double, const double*, double*)> sigma;
  std::function<void(double, const double*, const double*, double*)> jump;
  bool zero_at_zero = false;

  // Cold-path convenience evaluators.
  Vec eval_b(double t, const Vec& y) const;
  Vec eval_h(double t, const Vec& y, int i, int j) const;
  Vec eval_sigma(double t, const Vec& y, int i) const;
  Vec eval_jump(double t, const Vec& y, const Vec& z) const;
};

/// Spot-checks b, h, sigma (and K at every base atom) at y = 0 for the given
/// times; returns false when any component exceeds `tol` in magnitude.
bool trivial_solution_holds(const Coefficients& c, const UncertaintySet& set,
                            std::span<const double> times, double tol = 1e-12);

/// Per-step control lookup compiled once per (control, set, grid) and shared
/// across a whole path batch.
struct ControlTable {
  int d = 1;
  struct Interval {
    std::vector<double> p;     // d
    std::vector<double> Q;     // d*d row-major
    std::vector<double> QQt;   // d*d
    std::vector<double> marks; // n_atoms x d, mapped through the transport map
  };
  std::vector<Interval> intervals;
  std::vector<int> step_interval;  // per grid step
  std::string control_id;
};

ControlTable compile_control(const ControlPath& control, const UncertaintySet& set,
                             const TimeGrid& grid);

/// Scratch buffers reused across paths within one thread.
struct EulerWorkspace {
  std::vector<double> y, b, h, sigma, jump, drift, brown, sumj, y_pre;
  void resize(int n, int d) {
    y.resize(n);
    b.resize(n);
    h.resize(std::size_t(d) * d * n);
    sigma.resize(std::size_t(d) * n);
    jump.resize(n);
    drift.resize(n);
    brown.resize(n);
    sumj.resize(n);
    y_pre.resize(n);
  }
};

/// Core stepping loop. The observer is called at every event in time order:
/// obs(t, y, is_jump) with y the post-event state (length n). Throws
/// DivergenceError when the state leaves [-1e150, 1e150] or turns non-finite.
template <class Observer>
void euler_stream(const Coefficients& c, const ControlTable& ctl, const NoiseRealization& noise,
                  const double* y0, const TimeGrid& grid, EulerWorkspace& ws, Observer&& obs) {
  const int n = c.n;
  const int d = c.d;
  ws.resize(n, d);
  double* y = ws.y.data();
  for (int m = 0; m < n; ++m) y[m] = y0[m];
  obs(grid.t0, y, false);

  const double dt = grid.dt();
  std::size_t jp = 0;
  for (int i = 0; i < noise.n_steps; ++i) {
    const double t_l = grid.node(i);
    const double t_r = grid.node(i + 1);
    const ControlTable::Interval& iv = ctl.intervals[ctl.step_interval[i]];
    const double* dW = noise.increments(i);

    c.b(t_l, y, ws.b.data());
    c.h(t_l, y, ws.h.data());
    c.sigma(t_l, y, ws.sigma.data());

    // drift[m] = b + sum_ij h_ij (QQ^T)_ij + sum_i sigma_i p_i
    // brown[m] = sum_i sigma_i (Q dW)_i
    for (int m = 0; m < n; ++m) {
      double acc = ws.b[m];
      for (int ij = 0; ij < d * d; ++ij) acc += ws.h[std::size_t(ij) * n + m] * iv.QQt[ij];
      double br = 0.0;
      for (int si = 0; si < d; ++si) {
        double qdw = 0.0;
        for (int sj = 0; sj < d; ++sj) qdw += iv.Q[si * d + sj] * dW[sj];
        const double s = ws.sigma[std::size_t(si) * n + m];
        acc += s * iv.p[si];
        br += s * qdw;
      }
      ws.drift[m] = acc;
      ws.brown[m] = br;
    }

    for (int m = 0; m < n; ++m) ws.sumj[m] = 0.0;
    while (jp < noise.jumps.size() && noise.jumps[jp].time <= t_r) {
      const double u = noise.jumps[jp].time;
      const double frac = (u - t_l) / dt;
      for (int m = 0; m < n; ++m)
        ws.y_pre[m] = y[m] + ws.drift[m] * (u - t_l) + ws.brown[m] * frac + ws.sumj[m];
      const double* mark = iv.marks.data() + std::size_t(noise.jumps[jp].mark) * d;
      c.jump(u, ws.y_pre.data(), mark, ws.jump.data());
      for (int m = 0; m < n; ++m) {
        ws.sumj[m] += ws.jump[m];
        ws.y_pre[m] += ws.jump[m];
      }
      obs(u, ws.y_pre.data(), true);
      ++jp;
    }

    bool ok = true;
    for (int m = 0; m < n; ++m) {
      y[m] = y[m] + ws.drift[m] * dt + ws.brown[m] + ws.sumj[m];
      ok = ok && std::abs(y[m]) < 1e150;
    }
    if (!ok) throw DivergenceError(i + 1, t_r);
    obs(t_r, y, false);
  }
}

struct SdeEvent {
  double time = 0.0;
  bool is_jump = false;
  Vec y;
};

struct SdePath {
  int n = 0;
  std::vector<SdeEvent> events;
  std::string control_id;
  uint64_t seed = 0;
  uint64_t stream = 0;

  const Vec& terminal() const { return events.back().y; }
  /// Cadlag sample at time t.
  Vec at(double t) const;
  /// Columns: time, y_1..y_n, event_flag (0 grid node, 1 jump).
  void to_csv(std::ostream& os) const;
};

SdePath euler_solve(const Coefficients& c, const ControlPath& control,
                    const NoiseRealization& noise, const UncertaintySet& set, const Vec& y0,
                    const TimeGrid& grid);

struct PicardResult {
  SdePath path;
  std::vector<double> sup_diffs;  // per-iteration sup_t |Y^n - Y^{n-1}|
  int iterations = 0;
};

struct PicardNonConvergence : std::runtime_error {
  std::vector<double> sup_diffs;
  explicit PicardNonConvergence(std::vector<double> diffs)
      : std::runtime_error("fixed-point iteration did not converge in the allotted iterations"),
        sup_diffs(std::move(diffs)) {}
};

/// Fixed-point construction along a frozen noise realization: each iteration
/// integrates all four terms against the previous iterate. Converges to the
/// Euler path on the same event timeline.
PicardResult picard_solve(const Coefficients& c, const ControlPath& control,
                          const NoiseRealization& noise, const UncertaintySet& set, const Vec& y0,
                          const TimeGrid& grid, double tol = 1e-8, int max_iter = 50);

/// Growth and continuity moduli for the non-Lipschitz well-posedness checks.
struct NonLipschitzModuli {
  std::function<double(double, double)> H;
  std::function<double(double, double)> F;
};

/// Testable surrogates of the moduli conditions: H and F nondecreasing in u
/// at the sampled points, F(t, 0) = 0 to 1e-12. Returns violation messages.
std::vector<std::string> check_moduli(const NonLipschitzModuli& moduli,
                                      std::span<const double> times,
                                      std::span<const double> u_values);

/// Integrates du/dt = M * H(t, u) from (t0, u0) to the horizon with an
/// adaptive stepper; reports the blow-up time when the state escapes.
OdeSolutionReport moduli_ode_check(const NonLipschitzModuli& moduli, double M, double u0,
                                   double t0, double horizon, double rel_tol = 1e-10,
                                   double abs_tol = 1e-12);

}  // namespace glevy
