// Compares the serial reference against the OpenMP path kernel on a
// representative batch and checks that both produce identical bytes.

#include <glevy/batch_runs.hpp>
#include <glevy/models.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>

namespace {

double run_once(glevy::Exec exec, const glevy::ModelBundle& model,
                const glevy::UncertaintySet& set, const glevy::TimeGrid& grid, uint64_t n_paths,
                glevy::MeanSquareBatch& out) {
  const std::vector<glevy::ControlPath> controls = glevy::extreme_controls(set, grid);
  glevy::Vec y0(1);
  y0[0] = 1.0;
  const auto start = std::chrono::steady_clock::now();
  out = glevy::simulate_mean_square(model.coeffs, set, controls, grid, 21, y0, n_paths, 4242,
                                    exec);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool identical(const glevy::MeanSquareBatch& a, const glevy::MeanSquareBatch& b) {
  if (a.controls.size() != b.controls.size()) return false;
  for (std::size_t c = 0; c < a.controls.size(); ++c) {
    if (a.controls[c].mean_sq.size() != b.controls[c].mean_sq.size()) return false;
    if (std::memcmp(a.controls[c].mean_sq.data(), b.controls[c].mean_sq.data(),
                    a.controls[c].mean_sq.size() * sizeof(double)) != 0)
      return false;
    if (std::memcmp(a.sup_mean_sq.data(), b.sup_mean_sq.data(),
                    a.sup_mean_sq.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel path-kernel benchmark"};
  uint64_t n_paths = 2000;
  int n_steps = 2000;
  double horizon = 2.0;
  app.add_option("--paths", n_paths, "paths per control");
  app.add_option("--steps", n_steps, "grid steps");
  app.add_option("--horizon", horizon, "time horizon");
  CLI11_PARSE(app, argc, argv);

  const glevy::UncertaintySet set = glevy::example51_uncertainty_set();
  const glevy::ModelBundle model = glevy::make_example51_amended(set, glevy::kDefaultJumpR);
  const glevy::TimeGrid grid(0.0, horizon, n_steps);

  glevy::MeanSquareBatch serial, parallel;
  const double t_serial = run_once(glevy::Exec::serial, model, set, grid, n_paths, serial);
  const double t_parallel = run_once(glevy::Exec::parallel, model, set, grid, n_paths, parallel);

  std::printf("paths=%llu steps=%d controls=%zu threads=%d\n",
              static_cast<unsigned long long>(n_paths), n_steps, serial.controls.size(),
              glevy::effective_threads());
  std::printf("serial:   %8.3f s\n", t_serial);
  std::printf("parallel: %8.3f s  (speedup %.2fx)\n", t_parallel, t_serial / t_parallel);

  if (!identical(serial, parallel)) {
    std::printf("MISMATCH: serial and parallel results differ\n");
    return 1;
  }
  std::printf("results identical\n");
  return 0;
}
