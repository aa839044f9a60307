#include <glevy/sde.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace glevy {

Vec Coefficients::eval_b(double t, const Vec& y) const {
  Vec out(n);
  b(t, y.data(), out.data());
  return out;
}

Vec Coefficients::eval_h(double t, const Vec& y, int i, int j) const {
  std::vector<double> buf(std::size_t(d) * d * n);
  h(t, y.data(), buf.data());
  Vec out(n);
  for (int m = 0; m < n; ++m) out[m] = buf[std::size_t(i * d + j) * n + m];
  return out;
}

Vec Coefficients::eval_sigma(double t, const Vec& y, int i) const {
  std::vector<double> buf(std::size_t(d) * n);
  sigma(t, y.data(), buf.data());
  Vec out(n);
  for (int m = 0; m < n; ++m) out[m] = buf[std::size_t(i) * n + m];
  return out;
}

Vec Coefficients::eval_jump(double t, const Vec& y, const Vec& z) const {
  Vec out(n);
  jump(t, y.data(), z.data(), out.data());
  return out;
}

bool trivial_solution_holds(const Coefficients& c, const UncertaintySet& set,
                            std::span<const double> times, double tol) {
  const Vec zero = Vec::Zero(c.n);
  for (double t : times) {
    if (c.eval_b(t, zero).cwiseAbs().maxCoeff() > tol) return false;
    for (int i = 0; i < c.d; ++i) {
      if (c.eval_sigma(t, zero, i).cwiseAbs().maxCoeff() > tol) return false;
      for (int j = 0; j < c.d; ++j)
        if (c.eval_h(t, zero, i, j).cwiseAbs().maxCoeff() > tol) return false;
    }
    for (const auto& measure : set.jump_measures)
      for (const Vec& z : measure.points)
        if (c.eval_jump(t, zero, z).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

ControlTable compile_control(const ControlPath& control, const UncertaintySet& set,
                             const TimeGrid& grid) {
  control.validate_against(set);
  const std::vector<int> switch_nodes = control_node_indices(control, grid);
  const int d = set.dim();

  ControlTable table;
  table.d = d;
  table.control_id = control.id;
  table.intervals.reserve(control.triples.size());
  for (const TripleIndex& ti : control.triples) {
    ControlTable::Interval iv;
    const Vec& p = set.drifts[ti.drift];
    const Mat& Q = set.volatilities[ti.vol];
    const Mat QQt = Q * Q.transpose();
    iv.p.assign(p.data(), p.data() + d);
    iv.Q.resize(std::size_t(d) * d);
    iv.QQt.resize(std::size_t(d) * d);
    for (int r = 0; r < d; ++r)
      for (int cidx = 0; cidx < d; ++cidx) {
        iv.Q[r * d + cidx] = Q(r, cidx);
        iv.QQt[r * d + cidx] = QQt(r, cidx);
      }
    const std::size_t n_atoms = set.base_measure().size();
    iv.marks.resize(n_atoms * d);
    for (std::size_t a = 0; a < n_atoms; ++a) {
      const Vec& z = set.mapped_point(ti.measure, static_cast<int>(a));
      for (int cidx = 0; cidx < d; ++cidx) iv.marks[a * d + cidx] = z[cidx];
    }
    table.intervals.push_back(std::move(iv));
  }

  table.step_interval.resize(grid.n_steps);
  int interval = 0;
  for (int i = 0; i < grid.n_steps; ++i) {
    while (interval + 1 < static_cast<int>(control.triples.size()) &&
           switch_nodes[interval + 1] <= i)
      ++interval;
    table.step_interval[i] = interval;
  }
  return table;
}

Vec SdePath::at(double t) const {
  std::size_t lo = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].time <= t) lo = i;
    else break;
  }
  return events[lo].y;
}

void SdePath::to_csv(std::ostream& os) const {
  os << "time";
  for (int m = 1; m <= n; ++m) os << ",y_" << m;
  os << ",event_flag\n";
  char buf[32];
  for (const SdeEvent& e : events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf;
    for (int m = 0; m < n; ++m) {
      std::snprintf(buf, sizeof buf, "%.17g", e.y[m]);
      os << ',' << buf;
    }
    os << ',' << (e.is_jump ? 1 : 0) << '\n';
  }
}

SdePath euler_solve(const Coefficients& c, const ControlPath& control,
                    const NoiseRealization& noise, const UncertaintySet& set, const Vec& y0,
                    const TimeGrid& grid) {
  if (y0.size() != c.n) throw std::invalid_argument("euler_solve: initial value has wrong size");
  if (set.dim() != c.d) throw std::invalid_argument("euler_solve: coefficient/set dimension mismatch");
  const ControlTable table = compile_control(control, set, grid);

  SdePath path;
  path.n = c.n;
  path.control_id = control.id;
  path.seed = noise.seed;
  path.stream = noise.stream;
  path.events.reserve(grid.n_steps + noise.jumps.size() + 1);

  EulerWorkspace ws;
  euler_stream(c, table, noise, y0.data(), grid, ws, [&](double t, const double* y, bool jump) {
    SdeEvent e;
    e.time = t;
    e.is_jump = jump;
    e.y = Eigen::Map<const Vec>(y, c.n);
    path.events.push_back(std::move(e));
  });
  return path;
}

PicardResult picard_solve(const Coefficients& c, const ControlPath& control,
                          const NoiseRealization& noise, const UncertaintySet& set, const Vec& y0,
                          const TimeGrid& grid, double tol, int max_iter) {
  if (y0.size() != c.n) throw std::invalid_argument("picard_solve: initial value has wrong size");
  const ControlTable table = compile_control(control, set, grid);
  const int n = c.n;
  const int d = c.d;
  const double dt = grid.dt();

  // Event timeline: grid nodes plus jump times, with per-event step metadata.
  struct Event {
    double time;
    bool is_jump;
    int step;        // owning step (left node index); -1 for the initial node
    double frac;     // Brownian fraction of the step at this event
    const double* mark;
  };
  std::vector<Event> events;
  events.push_back({grid.t0, false, -1, 0.0, nullptr});
  {
    std::size_t jp = 0;
    for (int i = 0; i < grid.n_steps; ++i) {
      const double t_r = grid.node(i + 1);
      while (jp < noise.jumps.size() && noise.jumps[jp].time <= t_r) {
        const ControlTable::Interval& iv = table.intervals[table.step_interval[i]];
        events.push_back({noise.jumps[jp].time, true, i,
                          (noise.jumps[jp].time - grid.node(i)) / dt,
                          iv.marks.data() + std::size_t(noise.jumps[jp].mark) * d});
        ++jp;
      }
      events.push_back({t_r, false, i, 1.0, nullptr});
    }
  }
  const std::size_t n_events = events.size();
  std::vector<std::size_t> node_index(grid.n_steps + 1);  // event index of each grid node
  {
    int node = 0;
    for (std::size_t e = 0; e < n_events; ++e)
      if (!events[e].is_jump) node_index[node++] = e;
  }

  // prev/next hold post-event states; *_pre hold left limits at jump events.
  std::vector<double> prev(n_events * n), next(n_events * n);
  std::vector<double> prev_pre(n_events * n), next_pre(n_events * n);
  for (std::size_t e = 0; e < n_events; ++e)
    for (int m = 0; m < n; ++m) prev[e * n + m] = prev_pre[e * n + m] = y0[m];

  std::vector<double> bbuf(n), hbuf(std::size_t(d) * d * n), sbuf(std::size_t(d) * n),
      kbuf(n), drift(n), brown(n), sumj(n);
  std::vector<double> diffs;

  for (int iter = 1; iter <= max_iter; ++iter) {
    for (int m = 0; m < n; ++m) next[m] = next_pre[m] = y0[m];
    std::size_t e = 1;
    for (int i = 0; i < grid.n_steps; ++i) {
      const double t_l = grid.node(i);
      const ControlTable::Interval& iv = table.intervals[table.step_interval[i]];
      const double* dW = noise.increments(i);
      const double* y_prev = prev.data() + node_index[i] * n;
      const double* y_next_node = next.data() + node_index[i] * n;

      c.b(t_l, y_prev, bbuf.data());
      c.h(t_l, y_prev, hbuf.data());
      c.sigma(t_l, y_prev, sbuf.data());
      for (int m = 0; m < n; ++m) {
        double acc = bbuf[m];
        for (int ij = 0; ij < d * d; ++ij) acc += hbuf[std::size_t(ij) * n + m] * iv.QQt[ij];
        double br = 0.0;
        for (int si = 0; si < d; ++si) {
          double qdw = 0.0;
          for (int sj = 0; sj < d; ++sj) qdw += iv.Q[si * d + sj] * dW[sj];
          acc += sbuf[std::size_t(si) * n + m] * iv.p[si];
          br += sbuf[std::size_t(si) * n + m] * qdw;
        }
        drift[m] = acc;
        brown[m] = br;
      }

      for (int m = 0; m < n; ++m) sumj[m] = 0.0;
      for (; e < n_events && events[e].step == i; ++e) {
        const Event& ev = events[e];
        if (ev.is_jump) {
          // Jump term integrand uses the previous iterate's left limit.
          c.jump(ev.time, prev_pre.data() + e * n, ev.mark, kbuf.data());
          for (int m = 0; m < n; ++m) {
            const double pre = y_next_node[m] + drift[m] * (ev.time - t_l) +
                               brown[m] * ev.frac + sumj[m];
            next_pre[e * n + m] = pre;
            next[e * n + m] = pre + kbuf[m];
            sumj[m] += kbuf[m];
          }
        } else {
          bool ok = true;
          for (int m = 0; m < n; ++m) {
            const double val = y_next_node[m] + drift[m] * dt + brown[m] + sumj[m];
            next_pre[e * n + m] = val;
            next[e * n + m] = val;
            ok = ok && std::abs(val) < 1e150;
          }
          if (!ok) throw DivergenceError(i + 1, ev.time);
        }
      }
    }

    double sup = 0.0;
    for (std::size_t idx = 0; idx < next.size(); ++idx)
      sup = std::max(sup, std::abs(next[idx] - prev[idx]));
    diffs.push_back(sup);
    prev.swap(next);
    prev_pre.swap(next_pre);

    if (sup <= tol) {
      PicardResult result;
      result.iterations = iter;
      result.sup_diffs = std::move(diffs);
      result.path.n = n;
      result.path.control_id = control.id;
      result.path.seed = noise.seed;
      result.path.stream = noise.stream;
      result.path.events.reserve(n_events);
      for (std::size_t k = 0; k < n_events; ++k) {
        SdeEvent se;
        se.time = events[k].time;
        se.is_jump = events[k].is_jump;
        se.y = Eigen::Map<const Vec>(prev.data() + k * n, n);
        result.path.events.push_back(std::move(se));
      }
      return result;
    }
  }
  throw PicardNonConvergence(std::move(diffs));
}

std::vector<std::string> check_moduli(const NonLipschitzModuli& moduli,
                                      std::span<const double> times,
                                      std::span<const double> u_values) {
  std::vector<std::string> violations;
  for (double t : times) {
    if (std::abs(moduli.F(t, 0.0)) > 1e-12)
      violations.push_back("F(t,0) != 0 at t=" + std::to_string(t));
    for (std::size_t i = 0; i + 1 < u_values.size(); ++i) {
      if (moduli.H(t, u_values[i]) > moduli.H(t, u_values[i + 1]) + 1e-12)
        violations.push_back("H not nondecreasing at t=" + std::to_string(t));
      if (moduli.F(t, u_values[i]) > moduli.F(t, u_values[i + 1]) + 1e-12)
        violations.push_back("F not nondecreasing at t=" + std::to_string(t));
    }
  }
  return violations;
}

OdeSolutionReport moduli_ode_check(const NonLipschitzModuli& moduli, double M, double u0,
                                   double t0, double horizon, double rel_tol, double abs_tol) {
  if (!(M > 0.0)) throw std::invalid_argument("moduli_ode_check: M must be positive");
  return integrate_scalar_ode([&](double t, double u) { return M * moduli.H(t, u); }, t0, u0,
                              horizon, rel_tol, abs_tol);
}

}  // namespace glevy
