#include <glevy/numerics.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace glevy {

MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr out;
  out.n = xs.size();
  if (xs.empty()) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    out.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  KahanSum s;
  for (double x : xs) s.add(x);
  out.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    KahanSum q;
    for (double x : xs) {
      const double d = x - out.mean;
      q.add(d * d);
    }
    const double var = q.value() / static_cast<double>(xs.size() - 1);
    out.stderr_ = std::sqrt(std::max(0.0, var) / static_cast<double>(xs.size()));
  }
  return out;
}

OdeSolutionReport integrate_scalar_ode(const std::function<double(double, double)>& f, double t0,
                                       double u0, double t_end, double rel_tol, double abs_tol,
                                       double overflow) {
  // Cash-Karp embedded RK45 coefficients.
  static const double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;
  static const double b21 = 1.0 / 5;
  static const double b31 = 3.0 / 40, b32 = 9.0 / 40;
  static const double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
  static const double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
  static const double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824,
                      b64 = 44275.0 / 110592, b65 = 253.0 / 4096;
  static const double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
  static const double d1 = c1 - 2825.0 / 27648, d3 = c3 - 18575.0 / 48384,
                      d4 = c4 - 13525.0 / 55296, d5 = -277.0 / 14336, d6 = c6 - 1.0 / 4;

  OdeSolutionReport rep;
  double t = t0, u = u0;
  double h = (t_end - t0) / 100.0;
  const double h_min = (t_end - t0) * 1e-14;
  rep.curve.emplace_back(t, u);

  while (t < t_end) {
    if (!std::isfinite(u) || std::abs(u) > overflow) {
      rep.global = false;
      rep.blow_up_time = t;
      return rep;
    }
    if (h < h_min) {
      rep.global = false;
      rep.blow_up_time = t;
      return rep;
    }
    h = std::min(h, t_end - t);

    const double k1 = f(t, u);
    const double k2 = f(t + a2 * h, u + h * b21 * k1);
    const double k3 = f(t + a3 * h, u + h * (b31 * k1 + b32 * k2));
    const double k4 = f(t + a4 * h, u + h * (b41 * k1 + b42 * k2 + b43 * k3));
    const double k5 = f(t + a5 * h, u + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
    const double k6 =
        f(t + a6 * h, u + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));

    const double u5 = u + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
    const double err = std::abs(h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6));
    const double tol = abs_tol + rel_tol * std::max(std::abs(u), std::abs(u5));

    if (!std::isfinite(u5)) {
      h *= 0.25;
      continue;
    }
    if (err <= tol) {
      t += h;
      u = u5;
      rep.curve.emplace_back(t, u);
      const double grow = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::max(0.1, 0.9 * std::pow(tol / err, 0.25));
    }
  }
  rep.global = true;
  rep.u_end = u;
  return rep;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be positive");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double off = std::sqrt(static_cast<double>(i));
    J(i, i - 1) = off;
    J(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    gh.nodes[i] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    gh.weights[i] = v * v;
  }
  return gh;
}

double halton(uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("least_squares_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  KahanSum sx, sy;
  for (double v : x) sx.add(v);
  for (double v : y) sy.add(v);
  const double mx = sx.value() / n, my = sy.value() / n;
  KahanSum sxx, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    sxy.add((x[i] - mx) * (y[i] - my));
  }
  LineFit fit;
  if (sxx.value() == 0.0) throw std::invalid_argument("least_squares_line: degenerate abscissae");
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  KahanSum ss_res, ss_tot;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res.add(r * r);
    ss_tot.add((y[i] - my) * (y[i] - my));
  }
  fit.r2 = ss_tot.value() > 0.0 ? 1.0 - ss_res.value() / ss_tot.value()
                                : (ss_res.value() == 0.0 ? 1.0 : 0.0);
  return fit;
}

double poisson_pmf(int k, double lambda) {
  if (k < 0) return 0.0;
  double p = std::exp(-lambda);
  for (int i = 1; i <= k; ++i) p *= lambda / i;
  return p;
}

}  // namespace glevy
