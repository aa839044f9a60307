#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace glevy {

/// Compensated (Neumaier) accumulator. Reductions over path batches use this
/// in a fixed order so results do not depend on the parallel schedule.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

/// Two-pass compensated mean and standard error; all inputs must be finite.
MeanStderr mean_stderr(std::span<const double> xs);

struct OdeSolutionReport {
  bool global = false;
  double blow_up_time = 0.0;  // meaningful when !global
  double u_end = 0.0;         // meaningful when global
  std::vector<std::pair<double, double>> curve;
};

/// Adaptive Cash-Karp RK45 for a scalar ODE du/dt = f(t, u). Reports blow-up
/// when the state passes `overflow` or the step size underflows.
OdeSolutionReport integrate_scalar_ode(const std::function<double(double, double)>& f, double t0,
                                       double u0, double t_end, double rel_tol = 1e-10,
                                       double abs_tol = 1e-12, double overflow = 1e100);

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10);

/// Nodes and weights for E[g(Z)], Z standard normal:  E[g(Z)] ~= sum w_i g(x_i).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int n);

/// Halton radical-inverse sequence (index starts at 1).
double halton(uint64_t index, int base);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit least_squares_line(std::span<const double> x, std::span<const double> y);

double poisson_pmf(int k, double lambda);

}  // namespace glevy
