#include <glevy/models.hpp>

#include <cmath>

namespace glevy {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Coefficients scalar_linear(std::function<double(double)> b_coef,
                           std::function<double(double)> h_coef,
                           std::function<double(double)> s_coef, double jump_r) {
  Coefficients c;
  c.n = 1;
  c.d = 1;
  c.zero_at_zero = true;
  c.b = [f = std::move(b_coef)](double t, const double* y, double* out) { out[0] = f(t) * y[0]; };
  c.h = [f = std::move(h_coef)](double t, const double* y, double* out) { out[0] = f(t) * y[0]; };
  c.sigma = [f = std::move(s_coef)](double t, const double* y, double* out) {
    out[0] = f(t) * y[0];
  };
  c.jump = [jump_r](double, const double* y, const double* z, double* out) {
    out[0] = jump_r * sign(z[0]) * y[0];
  };
  return c;
}

}  // namespace

double jump_second_moment_shift(const UncertaintySet& set,
                                const std::function<double(const Vec&)>& R) {
  double best = -std::numeric_limits<double>::infinity();
  for (const JumpMeasure& v : set.jump_measures) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double r = R(v.points[i]);
      s += v.weights[i] * ((1.0 + r) * (1.0 + r) - 1.0);
    }
    best = std::max(best, s);
  }
  return best;
}

double jump_square_bound(const UncertaintySet& set,
                         const std::function<double(const Vec&)>& R) {
  double best = 0.0;
  for (const JumpMeasure& v : set.jump_measures) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double r = R(v.points[i]);
      s += v.weights[i] * r * r;
    }
    best = std::max(best, s);
  }
  return best;
}

ModelBundle make_example51(const UncertaintySet& set, double r) {
  ModelBundle m;
  m.name = "example51";
  m.coeffs = scalar_linear([](double) { return -2.0; },
                           [](double t) {
                             const double s = std::sin(t);
                             return -s * s / (2.0 * (1.0 + t * t));
                           },
                           [](double t) {
                             return 1.0 + std::abs(std::sin(t)) / std::sqrt(1.0 + t * t);
                           },
                           r);
  auto R = [r](const Vec& z) { return r * sign(z[0]); };
  m.jump_l = jump_second_moment_shift(set, R);
  m.jump_k = jump_square_bound(set, R);
  m.decay_rate = 3.0 - m.jump_l;
  m.lambda1 = [](double t) { return 2.0 * std::abs(std::sin(t)) / std::sqrt(1.0 + t * t); };
  m.alpha = 9.0 + m.jump_k;
  return m;
}

ModelBundle make_example51_amended(const UncertaintySet& set, double r) {
  ModelBundle m;
  m.name = "example51_amended";
  m.coeffs = scalar_linear([](double) { return -2.0; },
                           [](double t) {
                             const double s = std::sin(t);
                             const double w = 1.0 + t * t;
                             return -s * s / (2.0 * w * w);
                           },
                           [](double t) { return 1.0 + std::abs(std::sin(t)) / (1.0 + t * t); },
                           r);
  auto R = [r](const Vec& z) { return r * sign(z[0]); };
  m.jump_l = jump_second_moment_shift(set, R);
  m.jump_k = jump_square_bound(set, R);
  m.decay_rate = 3.0 - m.jump_l;
  m.lambda1 = [](double t) { return 2.0 * std::abs(std::sin(t)) / (1.0 + t * t); };
  m.alpha = 9.0 + m.jump_k;
  return m;
}

ModelBundle make_linear_test() {
  ModelBundle m;
  m.name = "linear_test";
  m.coeffs = scalar_linear([](double) { return -2.0; }, [](double) { return 0.0; },
                           [](double) { return 1.0; }, 0.0);
  m.coeffs.jump = [](double, const double*, const double*, double* out) { out[0] = 0.0; };
  m.jump_l = 0.0;
  m.jump_k = 0.0;
  m.decay_rate = 3.0;
  m.alpha = 5.0;
  return m;
}

namespace {

JumpMeasure scalar_measure(std::initializer_list<std::pair<double, double>> atoms) {
  JumpMeasure m;
  for (const auto& [z, w] : atoms) {
    Vec p(1);
    p[0] = z;
    m.points.push_back(p);
    m.weights.push_back(w);
  }
  return m;
}

Vec scalar_vec(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

Mat scalar_mat(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

}  // namespace

UncertaintySet example51_uncertainty_set() {
  UncertaintySet set;
  set.jump_measures = {scalar_measure({{0.5, 0.5}, {1.5, 0.5}}),
                       scalar_measure({{1.0, 0.5}, {2.0, 0.5}})};
  set.drifts = {scalar_vec(0.0)};
  set.volatilities = {scalar_mat(0.8), scalar_mat(1.0)};
  set.base_measure_index = 0;
  set.finalize();
  return set;
}

UncertaintySet default_uncertainty_set() {
  UncertaintySet set;
  set.jump_measures = {scalar_measure({{1.0, 0.5}, {-1.0, 0.5}}),
                       scalar_measure({{0.5, 0.5}, {-0.5, 0.5}})};
  set.drifts = {scalar_vec(-1.0), scalar_vec(1.0)};
  set.volatilities = {scalar_mat(0.5), scalar_mat(1.0)};
  set.base_measure_index = 0;
  set.finalize();
  return set;
}

UncertaintySet linear_test_uncertainty_set() {
  UncertaintySet set;
  set.jump_measures = {scalar_measure({{1.0, 0.5}, {-1.0, 0.5}})};
  set.drifts = {scalar_vec(0.0)};
  set.volatilities = {scalar_mat(1.0)};
  set.base_measure_index = 0;
  set.finalize();
  return set;
}

}  // namespace glevy
