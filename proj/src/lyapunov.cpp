#include <glevy/lyapunov.hpp>

#include <glevy/numerics.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace glevy {

LyapunovFunction LyapunovFunction::quadratic(int n) {
  LyapunovFunction f;
  f.V = [](double, const Vec& y) { return y.squaredNorm(); };
  f.V_t = [](double, const Vec&) { return 0.0; };
  f.V_y = [](double, const Vec& y) { return Vec(2.0 * y); };
  f.V_yy = [n](double, const Vec&) { return Mat(2.0 * Mat::Identity(n, n)); };
  return f;
}

LyapunovFunction LyapunovFunction::from_value(std::function<double(double, const Vec&)> value,
                                              int n, double fd_step) {
  LyapunovFunction f;
  f.V = value;
  f.V_t = [value, fd_step](double t, const Vec& y) {
    return (value(t + fd_step, y) - value(t - fd_step, y)) / (2.0 * fd_step);
  };
  f.V_y = [value, fd_step, n](double t, const Vec& y) {
    Vec g(n);
    Vec yp = y;
    for (int i = 0; i < n; ++i) {
      yp[i] = y[i] + fd_step;
      const double up = value(t, yp);
      yp[i] = y[i] - fd_step;
      const double dn = value(t, yp);
      yp[i] = y[i];
      g[i] = (up - dn) / (2.0 * fd_step);
    }
    return g;
  };
  f.V_yy = [value, fd_step, n](double t, const Vec& y) {
    Mat h(n, n);
    Vec yp = y;
    const double v0 = value(t, y);
    for (int i = 0; i < n; ++i) {
      yp[i] = y[i] + fd_step;
      const double up = value(t, yp);
      yp[i] = y[i] - fd_step;
      const double dn = value(t, yp);
      yp[i] = y[i];
      h(i, i) = (up - 2.0 * v0 + dn) / (fd_step * fd_step);
      for (int j = i + 1; j < n; ++j) {
        yp[i] = y[i] + fd_step;
        yp[j] = y[j] + fd_step;
        const double pp = value(t, yp);
        yp[j] = y[j] - fd_step;
        const double pm = value(t, yp);
        yp[i] = y[i] - fd_step;
        const double mm = value(t, yp);
        yp[j] = y[j] + fd_step;
        const double mp = value(t, yp);
        yp[i] = y[i];
        yp[j] = y[j];
        h(i, j) = h(j, i) = (pp - pm - mp + mm) / (4.0 * fd_step * fd_step);
      }
    }
    return h;
  };
  return f;
}

bool derivatives_consistent(const LyapunovFunction& V, double t, const Vec& y, double rel_tol,
                            double step) {
  const int n = static_cast<int>(y.size());
  const LyapunovFunction fd = LyapunovFunction::from_value(V.V, n, step);
  auto close = [rel_tol](double a, double b) {
    return std::abs(a - b) <= rel_tol * (1.0 + std::max(std::abs(a), std::abs(b)));
  };
  if (!close(V.V_t(t, y), fd.V_t(t, y))) return false;
  const Vec g = V.V_y(t, y), gf = fd.V_y(t, y);
  for (int i = 0; i < n; ++i)
    if (!close(g[i], gf[i])) return false;
  const Mat h = V.V_yy(t, y), hf = fd.V_yy(t, y);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!close(h(i, j), hf(i, j))) return false;
  return true;
}

double lv_operator(const LyapunovFunction& V, const Coefficients& coeffs,
                   const UncertaintySet& set, double t, const Vec& y) {
  const int d = coeffs.d;
  if (set.dim() != d) throw std::invalid_argument("lv_operator: dimension mismatch");
  const double v0 = V.V(t, y);
  const Vec vy = V.V_y(t, y);
  const Mat vyy = V.V_yy(t, y);

  double out = V.V_t(t, y) + vy.dot(coeffs.eval_b(t, y));

  // Second-order part: A_ij = <V_y, h_ij> + 1/2 <V_yy sigma_i, sigma_j>.
  Mat A(d, d);
  std::vector<Vec> sig(d);
  for (int i = 0; i < d; ++i) sig[i] = coeffs.eval_sigma(t, y, i);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      A(i, j) = vy.dot(coeffs.eval_h(t, y, i, j)) + 0.5 * sig[i].dot(vyy * sig[j]);
  double best_q = -std::numeric_limits<double>::infinity();
  for (const Mat& Q : set.volatilities)
    best_q = std::max(best_q, (A * Q * Q.transpose()).trace());
  out += best_q;

  double best_v = -std::numeric_limits<double>::infinity();
  for (const JumpMeasure& v : set.jump_measures) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += v.weights[i] * (V.V(t, Vec(y + coeffs.eval_jump(t, y, v.points[i]))) - v0);
    best_v = std::max(best_v, s);
  }
  return out + best_v;
}

namespace {

// Deterministic domain sweep: Halton points, the box corners and axis
// midpoints. Calls visit(index, t, y); the caller reduces in index order.
template <class Visit>
void sweep_domain(const Domain& domain, std::size_t n_samples, Exec exec, Visit&& visit) {
  static const int bases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  const int n = static_cast<int>(domain.y_lo.size());
  if (n + 1 > static_cast<int>(std::size(bases)))
    throw std::invalid_argument("domain dimension too large for the sampler");

  const std::size_t corners = std::size_t(1) << (n + 1);
  const std::size_t extras = corners + 2 * n;
  const std::size_t total = n_samples + extras;

  parallel_for_chunks(total, exec, [&](std::size_t lo, std::size_t hi) {
    Vec y(n);
    for (std::size_t i = lo; i < hi; ++i) {
      double t;
      if (i < corners) {
        t = (i & 1) ? domain.t_hi : domain.t_lo;
        for (int c = 0; c < n; ++c) y[c] = (i >> (c + 1)) & 1 ? domain.y_hi[c] : domain.y_lo[c];
      } else if (i < extras) {
        const std::size_t a = i - corners;
        const int axis = static_cast<int>(a / 2);
        t = 0.5 * (domain.t_lo + domain.t_hi);
        y.setZero();
        y[axis] = (a % 2) ? domain.y_hi[axis] : domain.y_lo[axis];
      } else {
        const uint64_t idx = static_cast<uint64_t>(i - extras) + 1;
        t = domain.t_lo + (domain.t_hi - domain.t_lo) * halton(idx, bases[0]);
        for (int c = 0; c < n; ++c)
          y[c] = domain.y_lo[c] + (domain.y_hi[c] - domain.y_lo[c]) * halton(idx, bases[c + 1]);
      }
      visit(i, t, y);
    }
  });
}

struct WorstPoint {
  double gap = -std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double t = 0.0;
  Vec y;
  double lhs = 0.0, rhs = 0.0;

  void consider(std::size_t i, double gap_val, double t_val, const Vec& y_val, double lhs_val,
                double rhs_val) {
    if (gap_val > gap || (gap_val == gap && i < index)) {
      gap = gap_val;
      index = i;
      t = t_val;
      y = y_val;
      lhs = lhs_val;
      rhs = rhs_val;
    }
  }
  void merge(const WorstPoint& o) {
    if (o.index != std::numeric_limits<std::size_t>::max())
      consider(o.index, o.gap, o.t, o.y, o.lhs, o.rhs);
  }
};

}  // namespace

EnvelopeCheck check_quadratic_envelope(const LyapunovFunction& V, double c_lower, double c_upper,
                                       const Domain& domain, std::size_t n_samples, Exec exec) {
  if (!(c_upper >= c_lower && c_lower > 0.0))
    throw std::invalid_argument("envelope check: need c_upper >= c_lower > 0");

  EnvelopeCheck out;
  WorstPoint w;
  std::mutex m;
  sweep_domain(domain, n_samples, exec, [&](std::size_t i, double t, const Vec& y) {
    const double v = V.V(t, y);
    const double q = y.squaredNorm();
    const double gap = std::max(c_lower * q - v, v - c_upper * q);
    if (gap > 1e-12) {
      std::lock_guard<std::mutex> lock(m);
      w.consider(i, gap, t, y, v, q);
    }
  });

  out.pass = w.index == std::numeric_limits<std::size_t>::max();
  if (!out.pass) {
    out.worst_gap = w.gap;
    out.witness_t = w.t;
    out.witness_y = w.y;
  }
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "not_checked";
  }
}

bool StabilityCertificate::all_requested_pass() const {
  if (!envelope_ok) return false;
  if (mean_square == Verdict::fail || mean_square_time_varying == Verdict::fail ||
      quasi_sure == Verdict::fail)
    return false;
  return mean_square == Verdict::pass || mean_square_time_varying == Verdict::pass;
}

std::string StabilityCertificate::to_json_string(int indent) const {
  nlohmann::json j;
  j["verdicts"] = {{"mean_square", to_string(mean_square)},
                   {"mean_square_time_varying", to_string(mean_square_time_varying)},
                   {"quasi_sure", to_string(quasi_sure)}};
  j["criteria"] = {
      {"mean_square", "LV(t,y) <= -decay_rate * V(t,y) on the sampled domain"},
      {"mean_square_time_varying",
       "LV(t,y) <= (-decay_rate + lambda1(t)) * V(t,y) on the sampled domain"},
      {"quasi_sure",
       "time-varying decay plus |b|^2 + sum|h|^2 + sum|sigma|^2 + max_v int |K|^2 dv <= "
       "alpha |y|^2"}};
  j["envelope_ok"] = envelope_ok;
  j["decay_rate"] = decay_rate;
  j["c_lower"] = c_lower;
  j["c_upper"] = c_upper;
  if (alpha_checked) j["alpha"] = alpha;
  j["lambda1_integral"] = lambda1_integral;
  j["growth_factor"] = growth_factor;
  j["horizon"] = horizon;
  j["predicted_ms_coefficient"] = predicted_ms_coefficient;
  j["predicted_qs_exponent"] = predicted_qs_exponent;
  j["n_samples"] = n_samples;
  j["domain"] = {{"t", {domain.t_lo, domain.t_hi}},
                 {"y_lo", std::vector<double>(domain.y_lo.data(), domain.y_lo.data() + domain.y_lo.size())},
                 {"y_hi", std::vector<double>(domain.y_hi.data(), domain.y_hi.data() + domain.y_hi.size())}};
  if (witness.present) {
    j["witness"] = {{"condition", witness.condition},
                    {"t", witness.t},
                    {"y", std::vector<double>(witness.y.data(), witness.y.data() + witness.y.size())},
                    {"lhs", witness.lhs},
                    {"rhs", witness.rhs}};
  }
  return j.dump(indent);
}

StabilityCertificate certify(const LyapunovFunction& V, const Coefficients& coeffs,
                             const UncertaintySet& set, const CertifySpec& spec) {
  if (!(spec.decay_rate > 0.0)) throw std::invalid_argument("certify: decay rate must be positive");
  StabilityCertificate cert;
  cert.decay_rate = spec.decay_rate;
  cert.c_lower = spec.c_lower;
  cert.c_upper = spec.c_upper;
  cert.domain = spec.domain;
  cert.n_samples = spec.n_samples;
  cert.horizon = spec.horizon > 0.0 ? spec.horizon : spec.domain.t_hi;

  const EnvelopeCheck env =
      check_quadratic_envelope(V, spec.c_lower, spec.c_upper, spec.domain, spec.n_samples, spec.exec);
  cert.envelope_ok = env.pass;
  if (!env.pass) {
    cert.witness.present = true;
    cert.witness.condition = "quadratic envelope";
    cert.witness.t = env.witness_t;
    cert.witness.y = env.witness_y;
  }

  const bool time_varying = static_cast<bool>(spec.lambda1);

  // Decay condition sweep: worst slack of LV/V against the allowed rate.
  WorstPoint worst;
  std::mutex m;
  sweep_domain(spec.domain, spec.n_samples, spec.exec, [&](std::size_t i, double t, const Vec& y) {
    const double v = V.V(t, y);
    if (!(v > 1e-12)) return;  // ratio checks only where V is bounded away from 0
    const double lv = lv_operator(V, coeffs, set, t, y);
    const double allowed = time_varying ? -spec.decay_rate + spec.lambda1(t) : -spec.decay_rate;
    const double gap = lv / v - allowed;
    if (gap > 1e-9) {
      std::lock_guard<std::mutex> lock(m);
      worst.consider(i, gap, t, y, lv / v, allowed);
    }
  });
  const bool decay_ok = worst.index == std::numeric_limits<std::size_t>::max();
  if (!decay_ok && !cert.witness.present) {
    cert.witness.present = true;
    cert.witness.condition = time_varying ? "LV/V <= -decay_rate + lambda1(t)"
                                          : "LV/V <= -decay_rate";
    cert.witness.t = worst.t;
    cert.witness.y = worst.y;
    cert.witness.lhs = worst.lhs;
    cert.witness.rhs = worst.rhs;
  }

  if (time_varying) {
    cert.mean_square_time_varying = decay_ok && env.pass ? Verdict::pass : Verdict::fail;
    cert.lambda1_integral = adaptive_simpson(
        [&](double t) { return std::max(0.0, spec.lambda1(t)); }, spec.domain.t_lo, cert.horizon,
        1e-10);
    cert.growth_factor = std::exp(cert.lambda1_integral);
  } else {
    cert.mean_square = decay_ok && env.pass ? Verdict::pass : Verdict::fail;
    cert.lambda1_integral = 0.0;
    cert.growth_factor = 1.0;
  }
  cert.predicted_ms_coefficient = cert.growth_factor * spec.c_upper / spec.c_lower;
  cert.predicted_qs_exponent = -0.5 * spec.decay_rate;

  if (spec.alpha) {
    cert.alpha = *spec.alpha;
    cert.alpha_checked = true;
    WorstPoint growth_worst;
    std::mutex gm;
    sweep_domain(spec.domain, spec.n_samples, spec.exec,
                 [&](std::size_t i, double t, const Vec& y) {
                   double lhs = coeffs.eval_b(t, y).squaredNorm();
                   for (int a = 0; a < coeffs.d; ++a) {
                     lhs += coeffs.eval_sigma(t, y, a).squaredNorm();
                     for (int b = 0; b < coeffs.d; ++b)
                       lhs += coeffs.eval_h(t, y, a, b).squaredNorm();
                   }
                   double jump_worst = 0.0;
                   for (const JumpMeasure& v : set.jump_measures) {
                     double s = 0.0;
                     for (std::size_t ai = 0; ai < v.size(); ++ai)
                       s += v.weights[ai] * coeffs.eval_jump(t, y, v.points[ai]).squaredNorm();
                     jump_worst = std::max(jump_worst, s);
                   }
                   lhs += jump_worst;
                   const double rhs = *spec.alpha * y.squaredNorm();
                   const double gap = lhs - rhs;
                   if (gap > 1e-9 * (1.0 + rhs)) {
                     std::lock_guard<std::mutex> lock(gm);
                     growth_worst.consider(i, gap, t, y, lhs, rhs);
                   }
                 });
    const bool growth_ok = growth_worst.index == std::numeric_limits<std::size_t>::max();
    if (!growth_ok && !cert.witness.present) {
      cert.witness.present = true;
      cert.witness.condition = "squared-coefficient growth bound";
      cert.witness.t = growth_worst.t;
      cert.witness.y = growth_worst.y;
      cert.witness.lhs = growth_worst.lhs;
      cert.witness.rhs = growth_worst.rhs;
    }
    const bool ms_ok = time_varying ? cert.mean_square_time_varying == Verdict::pass
                                    : cert.mean_square == Verdict::pass;
    cert.quasi_sure = growth_ok && ms_ok ? Verdict::pass : Verdict::fail;
  }
  return cert;
}

DecayFit decay_fit(std::span<const double> times, std::span<const double> mean_square) {
  if (times.size() != mean_square.size() || times.size() < 10)
    throw std::invalid_argument("decay_fit: need at least 10 points");
  std::vector<double> logs(mean_square.size());
  for (std::size_t i = 0; i < mean_square.size(); ++i) {
    if (!(mean_square[i] > 0.0))
      throw std::invalid_argument(
          "decay_fit: nonpositive mean-square value; increase the number of paths");
    logs[i] = std::log(mean_square[i]);
  }
  const LineFit fit = least_squares_line(times, logs);
  DecayFit out;
  out.decay_rate = -fit.slope;
  out.intercept = fit.intercept;
  out.r2 = fit.r2;
  return out;
}

QuasiSureRates quasi_sure_rate(std::span<const double> terminal_norms, double T,
                               double decay_rate, double eps) {
  if (!(T > 0.0)) throw std::invalid_argument("quasi_sure_rate: T must be positive");
  QuasiSureRates out;
  out.threshold = -0.5 * (decay_rate - eps);
  for (double r : terminal_norms) {
    if (r == 0.0) {
      ++out.n_zero;
      continue;
    }
    const double e = std::log(r) / T;
    out.exponents.push_back(e);
    if (e > out.threshold) ++out.n_exceed;
  }
  const std::size_t total = terminal_norms.size();
  out.exceed_fraction = total == 0 ? 0.0 : static_cast<double>(out.n_exceed) / total;
  return out;
}

QuasiSureRates quasi_sure_rate(std::span<const SdePath> paths, double decay_rate, double eps) {
  std::vector<double> norms;
  norms.reserve(paths.size());
  double T = 0.0;
  for (const SdePath& p : paths) {
    norms.push_back(p.terminal().norm());
    T = std::max(T, p.events.back().time);
  }
  return quasi_sure_rate(norms, T, decay_rate, eps);
}

}  // namespace glevy
