#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace glevy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform discretization of [t0, T] into n_steps steps.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double T_, int n_steps_) : t0(t0_), T(T_), n_steps(n_steps_) {
    if (!(T > t0)) throw std::invalid_argument("TimeGrid: T must exceed t0");
    if (n_steps <= 0) throw std::invalid_argument("TimeGrid: n_steps must be positive");
  }

  double dt() const { return (T - t0) / n_steps; }
  double span() const { return T - t0; }
  double node(int i) const { return i >= n_steps ? T : t0 + i * dt(); }
};

/// Thrown when a simulated state leaves the representable range.
struct DivergenceError : std::runtime_error {
  int step;
  double time;
  DivergenceError(int step_, double time_)
      : std::runtime_error("state diverged at step " + std::to_string(step_) +
                           " (t=" + std::to_string(time_) + ")"),
        step(step_),
        time(time_) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace glevy
