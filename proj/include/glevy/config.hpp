#pragma once

// Experiment configuration: one JSON document drives every subcommand.
// Unknown keys are rejected at every level; parse errors carry line numbers.
// The full schema is documented in the README.

#include <glevy/expectation.hpp>
#include <glevy/types.hpp>

#include <optional>
#include <string>
#include <vector>

namespace glevy {

struct GridSpec {
  double t0 = 0.0;
  double T = 1.0;
  int n_steps = 1000;
};

struct CoefficientSpec {
  // Named built-in ("example51", "example51_amended", "linear_test") or
  // scalar expression strings in t, y (and z for the jump term).
  std::string builtin;
  std::string b_expr, h_expr, sigma_expr, jump_expr;
  bool zero_at_zero = false;
};

struct LyapunovSpec {
  std::string V = "quadratic";  // "quadratic" or an expression in t, y
  std::optional<double> decay_rate;
  double c_lower = 1.0;
  double c_upper = 1.0;
  std::optional<double> alpha;
  std::string lambda1 = "default";  // "default", "none", or an expression in t
  double t_lo = 0.0, t_hi = 0.0;    // 0,0: use the grid span
  double y_abs = 2.0;               // state box [-y_abs, y_abs]^n
  std::size_t n_samples = 100000;
  double horizon = 0.0;             // 0: grid T
};

struct ExpectSpec {
  std::string op = "sublinear";  // sublinear | capacity | markov | iterated
  std::string functional = "B_T";
  double p = 2.0;
  std::vector<double> m_list = {0.5, 1.0, 2.0};
  std::vector<double> times;     // iterated: increment endpoints
  std::string phi = "sum";       // iterated: sum | tanh_sum
  double lattice_step = 0.01;
  double cross_check_tol = 0.0;  // iterated: compare against the sampler when > 0
};

struct BdgConfig {
  uint64_t n_paths = 10000;
  std::vector<double> eta_times;   // empty: constant 1 on the grid
  std::vector<double> eta_values;
};

struct ExperimentConfig {
  std::string uncertainty_file;
  std::string uncertainty_inline_json;  // set when given inline
  CoefficientSpec coefficients;
  double jump_r = 0.41421356237309515;
  GridSpec grid;
  uint64_t n_paths = 10000;
  uint64_t seed = 20240901;
  std::vector<double> y0 = {1.0};
  std::string solver = "euler";  // euler | picard
  double picard_tol = 1e-8;
  int picard_max_iter = 50;
  SearchSpec search;
  ExpectSpec expect;
  LyapunovSpec lyapunov;
  BdgConfig bdg;
  int checkpoints = 101;
  double fit_lo = 0.0, fit_hi = 0.0;  // 0,0: whole horizon
  double qs_epsilon = 0.5;
  int emit_paths = 1;
  std::string out_dir = "out";
  bool quiet = false;

  std::string config_json;  // the parsed document, re-serialized
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace glevy
