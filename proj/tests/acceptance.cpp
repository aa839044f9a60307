// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Criteria exercise the full pipeline at the production tolerances; the
// expensive decay experiment (A1/A3) runs once and is shared.

#include <glevy/batch_runs.hpp>
#include <glevy/commands.hpp>
#include <glevy/expectation.hpp>
#include <glevy/lyapunov.hpp>
#include <glevy/models.hpp>
#include <glevy/numerics.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

using namespace glevy;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run_criterion(const std::string& id, const std::function<void(std::string&, bool&)>& body) {
  std::string detail;
  bool pass = false;
  try {
    body(detail, pass);
  } catch (const std::exception& e) {
    pass = false;
    detail += std::string(" exception: ") + e.what();
  }
  report(id, pass, detail);
}

Vec v1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

Mat m1(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

UncertaintySet two_drift_set(std::vector<double> drifts, std::vector<double> vols) {
  UncertaintySet set;
  JumpMeasure m;
  m.points = {v1(1.0), v1(-1.0)};
  m.weights = {0.5, 0.5};
  set.jump_measures = {m};
  for (double p : drifts) set.drifts.push_back(v1(p));
  for (double q : vols) set.volatilities.push_back(m1(q));
  set.finalize();
  return set;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Shared state between A1 and A3.
struct DecayRun {
  MeanSquareBatch batch;
  double decay_rate = 0.0;
  double wall_seconds = 0.0;
  bool available = false;
};
DecayRun g_decay;

void a1_mean_square_decay(std::string& detail, bool& pass) {
  const UncertaintySet set = example51_uncertainty_set();  // Q {0.8, 1}, drift {0}, 2 measures
  const ModelBundle model = make_example51_amended(set, kDefaultJumpR);
  if (std::abs(model.jump_l - 1.0) > 1e-12)
    throw std::runtime_error("jump scale does not give l = 1");
  const TimeGrid grid(0.0, 10.0, 10000);  // dt = 1e-3
  const std::vector<ControlPath> controls = extreme_controls(set, grid);

  const auto start = std::chrono::steady_clock::now();
  g_decay.batch = simulate_mean_square(model.coeffs, set, controls, grid, 101, v1(1.0), 10000,
                                       8675309);
  g_decay.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  g_decay.decay_rate = model.decay_rate;  // 2
  g_decay.available = true;

  const DecayFit fit = decay_fit(g_decay.batch.checkpoint_times, g_decay.batch.sup_mean_sq);

  // The stated runtime budget assumes at least 4 cores; scale the allowance
  // when fewer are available.
  const int threads = effective_threads();
  const double budget = 60.0 * std::max(1.0, 4.0 / threads);
  const bool runtime_ok = g_decay.wall_seconds <= budget;

  pass = fit.decay_rate >= g_decay.decay_rate - 0.3 && fit.r2 >= 0.98 && runtime_ok;
  detail = "lambda_hat=" + fmt(fit.decay_rate) + " (>= " + fmt(g_decay.decay_rate - 0.3) +
           "), R2=" + fmt(fit.r2) + " (>= 0.98), wall=" + fmt(g_decay.wall_seconds) + "s (<= " +
           fmt(budget) + "s at " + std::to_string(threads) + " threads)";
}

void a2_mean_square_bound(std::string& detail, bool& pass) {
  const UncertaintySet set = linear_test_uncertainty_set();
  const ModelBundle model = make_linear_test();
  const TimeGrid grid(0.0, 2.0, 2000);
  const std::vector<ControlPath> controls = extreme_controls(set, grid);
  const MeanSquareBatch batch =
      simulate_mean_square(model.coeffs, set, controls, grid, 41, v1(1.0), 10000, 24601);

  // Certificate: rate 3, c_upper / c_lower = 1; E|Y_0|^2 = 1.
  const double rate = 3.0;
  pass = true;
  double worst_margin = 1e300;
  for (std::size_t c = 0; c < batch.checkpoint_times.size(); ++c) {
    const double t = batch.checkpoint_times[c];
    const double mean = batch.sup_mean_sq[c];
    const double rel_se = batch.controls[0].std_err[c] / std::max(mean, 1e-300);
    const double bound = std::exp(-rate * t) * (1.0 + 5.0 * rel_se);
    worst_margin = std::min(worst_margin, bound - mean);
    if (!(mean <= bound)) pass = false;
  }
  detail = "simulated curve below exp(-3t) * (1 + 5 relSE) at all 41 checkpoints; worst margin=" +
           fmt(worst_margin);
}

void a3_quasi_sure_rate(std::string& detail, bool& pass) {
  if (!g_decay.available) throw std::runtime_error("decay run unavailable");
  std::vector<double> norms;
  for (const auto& pc : g_decay.batch.controls)
    norms.insert(norms.end(), pc.terminal_norms.begin(), pc.terminal_norms.end());
  const QuasiSureRates qs = quasi_sure_rate(norms, 10.0, g_decay.decay_rate, 0.5);
  pass = qs.exceed_fraction <= 0.05;
  detail = "fraction of path exponents above " + fmt(qs.threshold) + ": " +
           fmt(qs.exceed_fraction) + " (<= 0.05) over " + std::to_string(norms.size()) +
           " samples";
}

void a4_sublinear_axioms(std::string& detail, bool& pass) {
  const TimeGrid grid(0.0, 1.0, 100);
  const UncertaintySet set = two_drift_set({-1.0, 1.0}, {0.5, 1.0});
  EstimateOptions opts;
  opts.n_paths = 8192;  // power of two keeps the exact axioms bit-exact
  opts.seed = 1337;

  auto terminal = [](const DrivenPath& p) { return p.b_terminal(); };
  std::map<std::string, PathFunctional> suite;
  suite["B_T"] = {"B_T", true, [terminal](const DrivenPath& p) { return terminal(p); }};
  suite["-B_T"] = {"-B_T", true, [terminal](const DrivenPath& p) { return -terminal(p); }};
  suite["|B_T|"] = {"|B_T|", true,
                    [terminal](const DrivenPath& p) { return std::abs(terminal(p)); }};
  suite["B_T+"] = {"B_T+", true,
                   [terminal](const DrivenPath& p) { return std::max(0.0, terminal(p)); }};
  suite["sup_B"] = {"sup_B", false, [](const DrivenPath& p) {
                      double s = -1e300;
                      for (std::size_t i = 0; i < p.size(); ++i) s = std::max(s, p.b[i]);
                      return s;
                    }};

  std::map<std::string, SublinearEstimate> est;
  for (const auto& [name, f] : suite) est[name] = estimate_sublinear(f, set, grid, opts);

  pass = true;
  std::string why;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      why += " [" + what + "]";
    }
  };

  // (i) monotonicity on pathwise-dominated pairs, 3 combined SE slack.
  auto mono = [&](const std::string& lo, const std::string& hi) {
    expect(est[lo].value <=
               est[hi].value + 3.0 * (est[lo].std_error + est[hi].std_error) + 1e-12,
           "monotone " + lo + " <= " + hi);
  };
  mono("B_T+", "|B_T|");
  mono("B_T", "|B_T|");
  mono("B_T", "sup_B");

  // (ii) constants preserved exactly.
  PathFunctional c075{"const", true, [](const DrivenPath&) { return 0.75; }};
  const SublinearEstimate ec = estimate_sublinear(c075, set, grid, opts);
  expect(ec.value == 0.75 && ec.std_error == 0.0, "constant preserved exactly");

  // (iii) sub-additivity for every pair, 3 combined SE slack.
  const std::vector<std::string> names{"B_T", "-B_T", "|B_T|", "B_T+", "sup_B"};
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a; b < names.size(); ++b) {
      PathFunctional sum;
      sum.name = names[a] + "+" + names[b];
      const auto fa = suite[names[a]].eval;
      const auto fb = suite[names[b]].eval;
      sum.eval = [fa, fb](const DrivenPath& p) { return fa(p) + fb(p); };
      const SublinearEstimate es = estimate_sublinear(sum, set, grid, opts);
      expect(es.value <= est[names[a]].value + est[names[b]].value +
                             3.0 * (es.std_error + est[names[a]].std_error +
                                    est[names[b]].std_error) +
                             1e-12,
             "subadditive " + sum.name);
    }

  // (iv) positive homogeneity, exact at a power-of-two scale.
  for (const std::string& name : names) {
    PathFunctional scaled;
    scaled.name = "2*" + name;
    const auto f = suite[name].eval;
    scaled.eval = [f](const DrivenPath& p) { return 2.0 * f(p); };
    expect(estimate_sublinear(scaled, set, grid, opts).value == 2.0 * est[name].value,
           "homogeneous " + name);
  }

  detail = "5-functional suite, n=8192, shared noise;" + (pass ? std::string(" all axioms hold") : why);
}

void a5_representation_cross_check(std::string& detail, bool& pass) {
  const UncertaintySet set = two_drift_set({-1.0, 1.0}, {0.5});
  const TimeGrid grid(0.0, 1.0, 50);
  LatticeSpec lattice;
  lattice.step = 0.01;
  const double iterated = iterated_expectation(
      [](std::span<const double> xs) { return xs[0] + xs[1]; }, 0.0, {0.5, 1.0}, set, lattice);

  PathFunctional cyl;
  cyl.name = "increment sum";
  cyl.eval = [](const DrivenPath& p) { return p.b_at(1.0); };
  EstimateOptions opts;
  opts.n_paths = 100000;
  opts.seed = 4242;
  const SublinearEstimate est = estimate_sublinear(cyl, set, grid, opts);

  const double scale = std::max(1.0, std::abs(iterated));
  const double gap = std::abs(iterated - est.value);
  pass = gap <= 0.02 * scale;
  detail = "iterated=" + fmt(iterated) + " sampler=" + fmt(est.value) + " gap=" + fmt(gap) +
           " (<= " + fmt(0.02 * scale) + ")";
}

void a6_tail_bound(std::string& detail, bool& pass) {
  const UncertaintySet set = default_uncertainty_set();
  const TimeGrid grid(0.0, 1.0, 200);
  EstimateOptions opts;
  opts.n_paths = 10000;
  opts.seed = 31415;
  PathFunctional x;
  x.name = "B_T";
  x.eval = [](const DrivenPath& p) { return p.b_terminal(); };
  const auto rows = markov_bound_check(x, 2.0, {0.5, 1.0, 2.0}, set, grid, opts);
  pass = true;
  detail = "X=B_T, p=2:";
  for (const MarkovRow& r : rows) {
    pass = pass && r.pass;
    detail += " M=" + fmt(r.M) + " cap=" + fmt(r.capacity) + "<=bound=" + fmt(r.bound) + ";";
  }
}

void a7_maximal_inequalities(std::string& detail, bool& pass) {
  const TimeGrid grid(0.0, 1.0, 200);
  pass = true;
  detail.clear();

  // Jump kind on the unit point mass: lhs is E[sup of the squared count].
  {
    UncertaintySet set;
    JumpMeasure m;
    m.points = {v1(1.0)};
    m.weights = {1.0};
    set.jump_measures = {m};
    set.drifts = {v1(0.0)};
    set.volatilities = {m1(0.0)};
    set.finalize();
    BdgSpec spec;
    spec.time_factor.times = {0.0, 1.0};
    spec.time_factor.values = {1.0};
    spec.mark_factor = [](const Vec& z) { return z[0]; };
    const BdgResult r = bdg_check(BdgKind::jump, spec, set, grid, 10000, 777);
    const double ref = bdg_reference_constant(BdgKind::jump, 1.0);
    pass = pass && r.ratio <= ref;
    detail += "jump(point mass) ratio=" + fmt(r.ratio) + "<=" + fmt(ref) + "; ";
  }

  const UncertaintySet set = two_drift_set({0.0}, {0.8, 1.0});
  const struct {
    BdgKind kind;
    const char* name;
  } kinds[] = {{BdgKind::jump, "jump"}, {BdgKind::brownian, "brownian"},
               {BdgKind::covariation, "covariation"}};
  for (const auto& [kind, name] : kinds) {
    BdgSpec spec;
    spec.time_factor.times = {0.0, 0.5, 1.0};
    spec.time_factor.values = {1.0, 0.5};
    if (kind == BdgKind::jump) spec.mark_factor = [](const Vec& z) { return z[0]; };
    const BdgResult r = bdg_check(kind, spec, set, grid, 10000, 778);
    const double ref = bdg_reference_constant(kind, 1.0);
    pass = pass && r.ratio <= ref;
    detail += std::string(name) + " ratio=" + fmt(r.ratio) + "<=" + fmt(ref) + "; ";
  }
}

void a8_picard_agreement(std::string& detail, bool& pass) {
  const UncertaintySet set = example51_uncertainty_set();
  const ModelBundle model = make_example51(set, kDefaultJumpR);
  const TimeGrid grid(0.0, 0.5, 500);  // dt = 1e-3
  const std::vector<ControlPath> controls = extreme_controls(set, grid);

  int worst_iters = 0;
  double worst_gap = 0.0;
  pass = true;
  for (uint64_t k = 0; k < 20; ++k) {
    const ControlPath& c = controls[k % controls.size()];
    const NoiseRealization noise = sample_noise(grid, set.base_measure(), 555, k);
    const PicardResult pr =
        picard_solve(model.coeffs, c, noise, set, v1(1.0), grid, 1e-8, 25);
    const SdePath euler = euler_solve(model.coeffs, c, noise, set, v1(1.0), grid);
    worst_iters = std::max(worst_iters, pr.iterations);
    double sup = 0.0;
    for (std::size_t i = 0; i < euler.events.size(); ++i)
      sup = std::max(sup,
                     (euler.events[i].y - pr.path.events[i].y).cwiseAbs().maxCoeff());
    worst_gap = std::max(worst_gap, sup);
    if (sup > 5e-2) pass = false;
  }
  detail = "20 (control, noise) pairs: max iterations=" + std::to_string(worst_iters) +
           " (<= 25), max sup-gap=" + fmt(worst_gap) + " (<= 0.05)";
}

void a9_operator_oracle(std::string& detail, bool& pass) {
  UncertaintySet set = example51_uncertainty_set();
  set.volatilities = {m1(1.0)};  // single q = 1
  set.finalize();
  const ModelBundle model = make_example51(set, kDefaultJumpR);
  const LyapunovFunction V = LyapunovFunction::quadratic(1);

  double worst = 0.0;
  std::size_t checked = 0;
  for (uint64_t i = 1; checked < 1000; ++i) {
    const double t = 10.0 * halton(i, 2);
    const double y = -2.0 + 4.0 * halton(i, 3);
    if (std::abs(y) < 1e-3) continue;
    ++checked;
    const double s = std::sin(t);
    const double expanded =
        (-4.0 - s * s / (1.0 + t * t) +
         std::pow(1.0 + std::abs(s) / std::sqrt(1.0 + t * t), 2) + model.jump_l) *
        y * y;
    const double lv = lv_operator(V, model.coeffs, set, t, v1(y));
    worst = std::max(worst, std::abs(lv - expanded) / (y * y));
  }
  pass = worst <= 1e-10;
  detail = "1000 low-discrepancy points: max |LV - expansion| per unit y^2 = " + fmt(worst) +
           " (<= 1e-10)";
}

void a10_determinism(std::string& detail, bool& pass) {
  const fs::path root = fs::temp_directory_path() / "glevy_acceptance_det";
  fs::remove_all(root);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const std::vector<std::string> commands = {"simulate", "expect", "certify", "example51", "bdg"};
  auto run_all = [&](const char* threads) {
    setenv("GLEVY_THREADS", threads, 1);
    std::map<std::string, std::string> bytes;
    for (const std::string& cmd : commands) {
      // Same directory on every rerun so the configs are truly identical.
      const fs::path dir = root / cmd;
      fs::remove_all(dir);
      fs::create_directories(dir);
      std::ostringstream cfg;
      cfg << R"({
        "model": "example51_amended",
        "grid": {"t0": 0.0, "T": 1.0, "n_steps": 250},
        "n_paths": 300,
        "seed": 97,
        "checkpoints": 11,
        "emit_paths": 1,
        "bdg": {"n_paths": 300},
        "expect": {"op": "sublinear", "functional": "B_T"},
        "quiet": true,
        "out": ")" << dir.string() << R"("
      })";
      run_command(cmd, parse_config(cfg.str()));
      for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".csv" || ext == ".json" || ext == ".svg")
          bytes[cmd + "/" + e.path().filename().string()] = slurp(e.path());
      }
    }
    unsetenv("GLEVY_THREADS");
    return bytes;
  };

  const auto one = run_all("1");
  const auto two = run_all("2");
  pass = one.size() == two.size() && !one.empty();
  std::size_t n_files = one.size();
  for (const auto& [name, bytes] : one) {
    auto it = two.find(name);
    if (it == two.end() || it->second != bytes) {
      pass = false;
      detail += " differs: " + name;
    }
  }
  detail = std::to_string(n_files) + " CSV/JSON/SVG artifacts byte-identical across " +
           "GLEVY_THREADS=1 and 2" + detail;
}

}  // namespace

int main() {
  std::printf("acceptance suite (threads=%d)\n", effective_threads());
  run_criterion("A1 mean-square decay experiment", a1_mean_square_decay);
  run_criterion("A2 exponential mean-square bound", a2_mean_square_bound);
  run_criterion("A3 quasi-sure pathwise rate", a3_quasi_sure_rate);
  run_criterion("A4 sublinear-expectation axioms", a4_sublinear_axioms);
  run_criterion("A5 backward-recursion cross-check", a5_representation_cross_check);
  run_criterion("A6 tail bound", a6_tail_bound);
  run_criterion("A7 maximal-inequality constants", a7_maximal_inequalities);
  run_criterion("A8 fixed-point vs Euler agreement", a8_picard_agreement);
  run_criterion("A9 operator expansion oracle", a9_operator_oracle);
  run_criterion("A10 byte-identical reruns", a10_determinism);
  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all criteria passed\n");
  return g_failures == 0 ? 0 : 1;
}
