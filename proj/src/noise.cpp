#include <glevy/noise.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace glevy {

NoiseRealization sample_noise(const TimeGrid& grid, const JumpMeasure& base, uint64_t seed,
                              uint64_t stream) {
  if (base.size() == 0) throw std::invalid_argument("sample_noise: empty base measure");
  const int d = base.dim();
  NoiseRealization out;
  out.n_steps = grid.n_steps;
  out.dim = d;
  out.seed = seed;
  out.stream = stream;

  Philox rng(seed, stream);
  const double sqrt_dt = std::sqrt(grid.dt());
  out.brownian.resize(std::size_t(grid.n_steps) * d);
  for (double& x : out.brownian) x = sqrt_dt * rng.normal();

  std::vector<double> cum(base.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    acc += base.weights[i];
    cum[i] = acc;
  }

  double t = grid.t0;
  for (;;) {
    t += rng.exponential();
    if (t > grid.T) break;
    const double u = rng.uniform() * acc;
    const int mark =
        static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    out.jumps.push_back({t, std::min<int>(mark, static_cast<int>(base.size()) - 1)});
  }
  return out;
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_noise(std::ostream& os, const NoiseRealization& noise, const TimeGrid& grid) {
  os.write("GLEVYNZ1", 8);
  put<uint64_t>(os, noise.seed);
  put<uint64_t>(os, noise.stream);
  put<double>(os, grid.t0);
  put<double>(os, grid.T);
  put<uint32_t>(os, static_cast<uint32_t>(noise.n_steps));
  put<uint32_t>(os, static_cast<uint32_t>(noise.dim));
  put<uint64_t>(os, noise.jumps.size());
  os.write(reinterpret_cast<const char*>(noise.brownian.data()),
           static_cast<std::streamsize>(noise.brownian.size() * sizeof(double)));
  for (const JumpEvent& e : noise.jumps) {
    put<double>(os, e.time);
    put<uint32_t>(os, static_cast<uint32_t>(e.mark));
  }
}

NoiseDump read_noise(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "GLEVYNZ1", 8) != 0)
    throw std::runtime_error("noise dump: bad magic");
  NoiseDump out;
  out.noise.seed = get<uint64_t>(is);
  out.noise.stream = get<uint64_t>(is);
  const double t0 = get<double>(is);
  const double T = get<double>(is);
  out.noise.n_steps = static_cast<int>(get<uint32_t>(is));
  out.noise.dim = static_cast<int>(get<uint32_t>(is));
  out.grid = TimeGrid(t0, T, out.noise.n_steps);
  const uint64_t n_jumps = get<uint64_t>(is);
  out.noise.brownian.resize(std::size_t(out.noise.n_steps) * out.noise.dim);
  is.read(reinterpret_cast<char*>(out.noise.brownian.data()),
          static_cast<std::streamsize>(out.noise.brownian.size() * sizeof(double)));
  out.noise.jumps.resize(n_jumps);
  for (uint64_t i = 0; i < n_jumps; ++i) {
    out.noise.jumps[i].time = get<double>(is);
    out.noise.jumps[i].mark = static_cast<int>(get<uint32_t>(is));
  }
  if (!is) throw std::runtime_error("noise dump: truncated stream");
  return out;
}

std::vector<int> control_node_indices(const ControlPath& control, const TimeGrid& grid) {
  const double tol = 1e-9 * std::max(1.0, grid.span());
  std::vector<int> nodes;
  nodes.reserve(control.times.size());
  for (double t : control.times) {
    const int i = static_cast<int>(std::lround((t - grid.t0) / grid.dt()));
    if (i < 0 || i > grid.n_steps || std::abs(grid.node(i) - t) > tol)
      throw std::invalid_argument("control switch times must lie on grid nodes");
    nodes.push_back(i);
  }
  if (nodes.front() != 0 || nodes.back() != grid.n_steps)
    throw std::invalid_argument("control must span the whole grid");
  return nodes;
}

DrivenPath levy_ito_integral(const ControlPath& control, const NoiseRealization& noise,
                             const UncertaintySet& set, const TimeGrid& grid) {
  control.validate_against(set);
  const std::vector<int> switch_nodes = control_node_indices(control, grid);
  const int d = set.dim();
  if (noise.dim != d || noise.n_steps != grid.n_steps)
    throw std::invalid_argument("levy_ito_integral: noise does not match grid/set");

  DrivenPath path;
  path.dim = d;
  const std::size_t reserve = grid.n_steps + noise.jumps.size() + 1;
  path.times.reserve(reserve);
  path.jump_flag.reserve(reserve);
  path.b.reserve(reserve * d);
  path.b_cont.reserve(reserve * d);
  path.cov.reserve(reserve * d * d);
  path.jump_mark.reserve(reserve * d);

  Vec bc = Vec::Zero(d);   // continuous part
  Vec jsum = Vec::Zero(d); // accumulated mapped jumps
  Mat cov = Mat::Zero(d, d);

  auto push = [&](double t, bool jump, const Vec& bcont_val, const Vec& bfull_val,
                  const Mat& cov_val, const Vec* mark) {
    path.times.push_back(t);
    path.jump_flag.push_back(jump ? 1 : 0);
    for (int c = 0; c < d; ++c) path.b_cont.push_back(bcont_val[c]);
    for (int c = 0; c < d; ++c) path.b.push_back(bfull_val[c]);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) path.cov.push_back(cov_val(r, c));
    for (int c = 0; c < d; ++c) path.jump_mark.push_back(mark ? (*mark)[c] : 0.0);
  };

  push(grid.t0, false, bc, bc, cov, nullptr);

  const double dt = grid.dt();
  std::size_t jp = 0;
  int interval = 0;
  for (int i = 0; i < grid.n_steps; ++i) {
    const double t_l = grid.node(i);
    const double t_r = grid.node(i + 1);
    while (interval + 1 < static_cast<int>(control.triples.size()) &&
           switch_nodes[interval + 1] <= i)
      ++interval;
    const TripleIndex& ti = control.triples[interval];
    const Vec& p = set.drifts[ti.drift];
    const Mat& Q = set.volatilities[ti.vol];
    const Mat QQt = Q * Q.transpose();

    Eigen::Map<const Vec> dW(noise.increments(i), d);
    const Vec qdw = Q * dW;

    while (jp < noise.jumps.size() && noise.jumps[jp].time <= t_r) {
      const double u = noise.jumps[jp].time;
      const double frac = (u - t_l) / dt;
      const Vec bc_u = bc + p * (u - t_l) + qdw * frac;
      const Vec mark = set.mapped_point(ti.measure, noise.jumps[jp].mark);
      jsum += mark;
      const Mat cov_u = cov + QQt * (u - t_l);
      push(u, true, bc_u, Vec(bc_u + jsum), cov_u, &mark);
      ++jp;
    }

    bc += p * dt + qdw;
    cov += QQt * dt;
    push(t_r, false, bc, Vec(bc + jsum), cov, nullptr);
  }
  return path;
}

std::size_t DrivenPath::index_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

double SteppedPath::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return values.front();
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double SteppedPath::sup_abs() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}

SteppedPath jump_integral(const std::function<double(double, const Vec&)>& field,
                          const ControlPath& control, const NoiseRealization& noise,
                          const UncertaintySet& set, const TimeGrid& grid) {
  control.validate_against(set);
  control_node_indices(control, grid);

  SteppedPath path;
  path.times.push_back(grid.t0);
  path.values.push_back(0.0);
  double acc = 0.0;
  for (const JumpEvent& e : noise.jumps) {
    const int k = control.interval_at(e.time);
    const Vec& mark = set.mapped_point(control.triples[k].measure, e.mark);
    acc += field(e.time, mark);
    path.times.push_back(e.time);
    path.values.push_back(acc);
  }
  if (path.times.back() < grid.T) {
    path.times.push_back(grid.T);
    path.values.push_back(acc);
  }
  return path;
}

}  // namespace glevy
