#include <glevy/config.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace glevy {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at line " +
                      std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }

  reject_unknown(j,
                 {"uncertainty", "uncertainty_file", "model", "jump_r", "grid", "n_paths", "seed",
                  "y0", "solver", "picard", "search", "expect", "lyapunov", "bdg", "checkpoints",
                  "fit_window", "qs_epsilon", "emit_paths", "out", "quiet"},
                 "top level");

  ExperimentConfig cfg;
  cfg.config_json = j.dump(2);

  if (j.contains("uncertainty") && j.contains("uncertainty_file"))
    throw ConfigError("config: give either 'uncertainty' or 'uncertainty_file', not both");
  if (j.contains("uncertainty")) cfg.uncertainty_inline_json = j["uncertainty"].dump();
  if (j.contains("uncertainty_file")) cfg.uncertainty_file = j["uncertainty_file"].get<std::string>();

  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.is_string()) {
      cfg.coefficients.builtin = m.get<std::string>();
      if (cfg.coefficients.builtin != "example51" &&
          cfg.coefficients.builtin != "example51_amended" &&
          cfg.coefficients.builtin != "linear_test")
        throw ConfigError("config: unknown model '" + cfg.coefficients.builtin + "'");
    } else {
      reject_unknown(m, {"b", "h", "sigma", "K", "zero_at_zero"}, "model");
      cfg.coefficients.b_expr = m.value("b", "0");
      cfg.coefficients.h_expr = m.value("h", "0");
      cfg.coefficients.sigma_expr = m.value("sigma", "0");
      cfg.coefficients.jump_expr = m.value("K", "0");
      cfg.coefficients.zero_at_zero = m.value("zero_at_zero", false);
    }
  } else {
    cfg.coefficients.builtin = "example51_amended";
  }

  cfg.jump_r = j.value("jump_r", cfg.jump_r);

  if (j.contains("grid")) {
    reject_unknown(j["grid"], {"t0", "T", "n_steps"}, "grid");
    cfg.grid.t0 = j["grid"].value("t0", 0.0);
    cfg.grid.T = j["grid"].value("T", 1.0);
    cfg.grid.n_steps = j["grid"].value("n_steps", 1000);
  }
  cfg.n_paths = j.value("n_paths", cfg.n_paths);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("y0")) cfg.y0 = j["y0"].get<std::vector<double>>();

  cfg.solver = j.value("solver", cfg.solver);
  if (cfg.solver != "euler" && cfg.solver != "picard")
    throw ConfigError("config: solver must be 'euler' or 'picard'");
  if (j.contains("picard")) {
    reject_unknown(j["picard"], {"tol", "max_iter"}, "picard");
    cfg.picard_tol = j["picard"].value("tol", cfg.picard_tol);
    cfg.picard_max_iter = j["picard"].value("max_iter", cfg.picard_max_iter);
  }

  if (j.contains("search")) {
    const json& s = j["search"];
    reject_unknown(s, {"kind", "k_intervals", "n_rounds"}, "search");
    const std::string kind = s.value("kind", "extremes");
    if (kind == "extremes")
      cfg.search.kind = SearchSpec::Kind::extremes;
    else if (kind == "coordinate_ascent")
      cfg.search.kind = SearchSpec::Kind::coordinate_ascent;
    else
      throw ConfigError("config: unknown search kind '" + kind + "'");
    cfg.search.k_intervals = s.value("k_intervals", cfg.search.k_intervals);
    cfg.search.n_rounds = s.value("n_rounds", cfg.search.n_rounds);
  }

  if (j.contains("expect")) {
    const json& e = j["expect"];
    reject_unknown(e, {"op", "functional", "p", "M_list", "times", "phi", "lattice_step",
                       "cross_check_tol"},
                   "expect");
    cfg.expect.op = e.value("op", cfg.expect.op);
    cfg.expect.functional = e.value("functional", cfg.expect.functional);
    cfg.expect.p = e.value("p", cfg.expect.p);
    if (e.contains("M_list")) cfg.expect.m_list = e["M_list"].get<std::vector<double>>();
    if (e.contains("times")) cfg.expect.times = e["times"].get<std::vector<double>>();
    cfg.expect.phi = e.value("phi", cfg.expect.phi);
    cfg.expect.lattice_step = e.value("lattice_step", cfg.expect.lattice_step);
    cfg.expect.cross_check_tol = e.value("cross_check_tol", cfg.expect.cross_check_tol);
  }

  if (j.contains("lyapunov")) {
    const json& l = j["lyapunov"];
    reject_unknown(l,
                   {"V", "decay_rate", "c_lower", "c_upper", "alpha", "lambda1", "t_lo", "t_hi",
                    "y_abs", "n_samples", "horizon"},
                   "lyapunov");
    cfg.lyapunov.V = l.value("V", cfg.lyapunov.V);
    if (l.contains("decay_rate")) cfg.lyapunov.decay_rate = l["decay_rate"].get<double>();
    cfg.lyapunov.c_lower = l.value("c_lower", cfg.lyapunov.c_lower);
    cfg.lyapunov.c_upper = l.value("c_upper", cfg.lyapunov.c_upper);
    if (l.contains("alpha") && !l["alpha"].is_null())
      cfg.lyapunov.alpha = l["alpha"].get<double>();
    cfg.lyapunov.lambda1 = l.value("lambda1", cfg.lyapunov.lambda1);
    cfg.lyapunov.t_lo = l.value("t_lo", cfg.lyapunov.t_lo);
    cfg.lyapunov.t_hi = l.value("t_hi", cfg.lyapunov.t_hi);
    cfg.lyapunov.y_abs = l.value("y_abs", cfg.lyapunov.y_abs);
    cfg.lyapunov.n_samples = l.value("n_samples", cfg.lyapunov.n_samples);
    cfg.lyapunov.horizon = l.value("horizon", cfg.lyapunov.horizon);
  }

  if (j.contains("bdg")) {
    const json& b = j["bdg"];
    reject_unknown(b, {"n_paths", "eta_times", "eta_values"}, "bdg");
    cfg.bdg.n_paths = b.value("n_paths", cfg.bdg.n_paths);
    if (b.contains("eta_times")) cfg.bdg.eta_times = b["eta_times"].get<std::vector<double>>();
    if (b.contains("eta_values")) cfg.bdg.eta_values = b["eta_values"].get<std::vector<double>>();
  }

  cfg.checkpoints = j.value("checkpoints", cfg.checkpoints);
  if (j.contains("fit_window")) {
    const auto w = j["fit_window"].get<std::vector<double>>();
    if (w.size() != 2) throw ConfigError("config: fit_window must be [lo, hi]");
    cfg.fit_lo = w[0];
    cfg.fit_hi = w[1];
  }
  cfg.qs_epsilon = j.value("qs_epsilon", cfg.qs_epsilon);
  cfg.emit_paths = j.value("emit_paths", cfg.emit_paths);
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.quiet = j.value("quiet", cfg.quiet);

  if (cfg.checkpoints < 2) throw ConfigError("config: need at least 2 checkpoints");
  if (cfg.emit_paths < 0) throw ConfigError("config: emit_paths must be >= 0");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace glevy
