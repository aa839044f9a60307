#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <glevy/commands.hpp>
#include <glevy/expr.hpp>
#include <glevy/models.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace glevy;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("glevy_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Collects (filename -> bytes) for the whole output directory.
std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("expr: parse and evaluate") {
  CHECK(Expr::parse("1 + 2*3").eval(0, 0, 0) == 7.0);
  CHECK(Expr::parse("-2^2").eval(0, 0, 0) == -4.0);  // unary minus binds the power
  CHECK(Expr::parse("2^-1").eval(0, 0, 0) == 0.5);
  CHECK(Expr::parse("(1+t)*y").eval(2.0, 3.0, 0) == 9.0);
  CHECK(Expr::parse("sin(pi/2)").eval(0, 0, 0) == doctest::Approx(1.0));
  CHECK(Expr::parse("abs(z)*sign(z)").eval(0, 0, -2.5) == doctest::Approx(-2.5));
  CHECK(Expr::parse("sqrt(1+t^2)").eval(3.0, 0, 0) == doctest::Approx(std::sqrt(10.0)));
  CHECK_THROWS_AS(Expr::parse("1 +"), ConfigError);
  CHECK_THROWS_AS(Expr::parse("foo(1)"), ConfigError);
  CHECK_THROWS_AS(Expr::parse("(1"), ConfigError);
}

TEST_CASE("config: defaults, overrides and rejection of unknown keys") {
  const ExperimentConfig cfg = parse_config(R"({
    "model": "linear_test",
    "grid": {"t0": 0.0, "T": 2.0, "n_steps": 500},
    "n_paths": 500,
    "seed": 7,
    "out": "outdir"
  })");
  CHECK(cfg.coefficients.builtin == "linear_test");
  CHECK(cfg.grid.T == 2.0);
  CHECK(cfg.n_paths == 500);
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "outdir");
  CHECK(cfg.solver == "euler");

  CHECK_THROWS_AS(parse_config(R"({"mode": "x"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"t0": 0, "T": 1, "steps": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "unknown_model"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"solver": "heun"})"), ConfigError);
}

TEST_CASE("config: parse errors carry line numbers") {
  try {
    parse_config("{\n  \"model\": \"linear_test\",\n  \"n_paths\": oops\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("config: inline uncertainty set round trips through a command") {
  const fs::path dir = fresh_dir("inline_set");
  std::ostringstream cfg;
  cfg << R"({
    "model": "linear_test",
    "uncertainty": )"
      << to_json_string(linear_test_uncertainty_set()) << R"(,
    "grid": {"t0": 0.0, "T": 0.5, "n_steps": 100},
    "n_paths": 150,
    "seed": 12,
    "emit_paths": 1,
    "quiet": true,
    "out": ")"
      << dir.string() << R"("
  })";
  const RunReport r = cmd_simulate(parse_config(cfg.str()));
  CHECK(r.ok);
  CHECK(fs::exists(dir / "paths.csv"));
  CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("cmd_simulate: zero-coefficient custom model gives constant paths") {
  const fs::path dir = fresh_dir("const_paths");
  std::ostringstream cfg;
  cfg << R"({
    "model": {"b": "0", "h": "0", "sigma": "0", "K": "0"},
    "grid": {"t0": 0.0, "T": 1.0, "n_steps": 50},
    "n_paths": 120,
    "y0": [2.5],
    "seed": 5,
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_simulate(parse_config(cfg.str()));
  CHECK(r.ok);
  const std::string csv = slurp(dir / "paths.csv");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "time,y_1,event_flag");
  while (std::getline(is, line)) CHECK(line.find(",2.5,") != std::string::npos);
}

TEST_CASE("cmd_simulate: example51 smoke run completes quickly") {
  const fs::path dir = fresh_dir("smoke51");
  std::ostringstream cfg;
  cfg << R"({
    "model": "example51",
    "grid": {"t0": 0.0, "T": 1.0, "n_steps": 1000},
    "n_paths": 100,
    "seed": 9,
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const auto start = std::chrono::steady_clock::now();
  const RunReport r = cmd_simulate(parse_config(cfg.str()));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(r.ok);
  CHECK(secs < 5.0);
}

TEST_CASE("cmd_simulate: picard solver is wired through") {
  const fs::path dir = fresh_dir("picard_sim");
  std::ostringstream cfg;
  cfg << R"({
    "model": "example51",
    "solver": "picard",
    "grid": {"t0": 0.0, "T": 0.5, "n_steps": 250},
    "n_paths": 100,
    "seed": 10,
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_simulate(parse_config(cfg.str()));
  CHECK(r.ok);
  CHECK(r.metrics_json.find("max_picard_iterations") != std::string::npos);
}

TEST_CASE("cmd_certify: linear test passes, enlarged volatility fails with witness") {
  {
    const fs::path dir = fresh_dir("certify_pass");
    std::ostringstream cfg;
    cfg << R"({
      "model": "linear_test",
      "grid": {"t0": 0.0, "T": 2.0, "n_steps": 100},
      "lyapunov": {"decay_rate": 3.0, "n_samples": 20000, "lambda1": "none"},
      "quiet": true,
      "out": ")" << dir.string() << R"("
    })";
    const RunReport r = cmd_certify(parse_config(cfg.str()));
    CHECK(r.ok);
    const std::string cert = slurp(dir / "certificate.json");
    CHECK(cert.find("\"mean_square\": \"pass\"") != std::string::npos);
  }
  {
    const fs::path dir = fresh_dir("certify_fail");
    std::ostringstream cfg;
    cfg << R"({
      "model": "linear_test",
      "uncertainty": {"d": 1,
        "measures": [{"atoms": [[[1.0], 0.5], [[-1.0], 0.5]]}],
        "drifts": [[0.0]],
        "vols": [[[3.0]]],
        "base": 0},
      "grid": {"t0": 0.0, "T": 2.0, "n_steps": 100},
      "lyapunov": {"decay_rate": 3.0, "n_samples": 20000, "lambda1": "none"},
      "quiet": true,
      "out": ")" << dir.string() << R"("
    })";
    const RunReport r = cmd_certify(parse_config(cfg.str()));
    CHECK_FALSE(r.ok);
    const std::string cert = slurp(dir / "certificate.json");
    CHECK(cert.find("\"mean_square\": \"fail\"") != std::string::npos);
    CHECK(cert.find("witness") != std::string::npos);
  }
}

TEST_CASE("cmd_expect: constant functional is exact; markov table passes") {
  {
    const fs::path dir = fresh_dir("expect_const");
    std::ostringstream cfg;
    cfg << R"({
      "model": "linear_test",
      "grid": {"t0": 0.0, "T": 1.0, "n_steps": 50},
      "n_paths": 1024,
      "seed": 3,
      "expect": {"op": "sublinear", "functional": "const:0.7"},
      "quiet": true,
      "out": ")" << dir.string() << R"("
    })";
    const RunReport r = cmd_expect(parse_config(cfg.str()));
    CHECK(r.ok);
    CHECK(r.metrics_json.find("0.7") != std::string::npos);
  }
  {
    const fs::path dir = fresh_dir("expect_markov");
    std::ostringstream cfg;
    cfg << R"({
      "grid": {"t0": 0.0, "T": 1.0, "n_steps": 100},
      "model": {"b": "0", "h": "0", "sigma": "0", "K": "0"},
      "n_paths": 2000,
      "seed": 4,
      "expect": {"op": "markov", "functional": "B_T", "p": 2, "M_list": [0.5, 1.0, 2.0]},
      "quiet": true,
      "out": ")" << dir.string() << R"("
    })";
    const RunReport r = cmd_expect(parse_config(cfg.str()));
    CHECK(r.ok);
    const std::string csv = slurp(dir / "expect.csv");
    CHECK(csv.rfind("M,capacity,bound,combined_se,pass", 0) == 0);
  }
}

TEST_CASE("cmd_expect: capacity event string and ascent search parse and run") {
  const fs::path dir = fresh_dir("expect_capacity");
  std::ostringstream cfg;
  cfg << R"({
    "model": {"b": "0", "h": "0", "sigma": "0", "K": "0"},
    "grid": {"t0": 0.0, "T": 1.0, "n_steps": 50},
    "n_paths": 2000,
    "seed": 5,
    "search": {"kind": "coordinate_ascent", "k_intervals": 2, "n_rounds": 1},
    "expect": {"op": "capacity", "functional": "B_T_cont>0"},
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const ExperimentConfig parsed = parse_config(cfg.str());
  CHECK(parsed.search.kind == SearchSpec::Kind::coordinate_ascent);
  CHECK(parsed.search.k_intervals == 2);
  const RunReport r = cmd_expect(parsed);
  CHECK(r.ok);
  const auto metrics = nlohmann::json::parse(r.metrics_json);
  const double value = metrics.at("estimate").at("value").get<double>();
  CHECK(value > 0.5);  // worst case favors the positive drift
  CHECK(value <= 1.0);
}

TEST_CASE("uncertainty_file config key loads a set from disk") {
  const fs::path dir = fresh_dir("uncfile");
  const fs::path setfile = dir / "set.json";
  {
    std::ofstream os(setfile);
    os << to_json_string(linear_test_uncertainty_set(), 2);
  }
  std::ostringstream cfg;
  cfg << R"({
    "model": "linear_test",
    "uncertainty_file": ")" << setfile.string() << R"(",
    "grid": {"t0": 0.0, "T": 0.5, "n_steps": 50},
    "lyapunov": {"decay_rate": 3.0, "n_samples": 5000, "lambda1": "none"},
    "quiet": true,
    "out": ")" << (dir / "out").string() << R"("
  })";
  const RunReport r = cmd_certify(parse_config(cfg.str()));
  CHECK(r.ok);
}

TEST_CASE("cmd_expect: iterated with sampler cross-check") {
  const fs::path dir = fresh_dir("expect_iter");
  std::ostringstream cfg;
  cfg << R"({
    "model": {"b": "0", "h": "0", "sigma": "0", "K": "0"},
    "grid": {"t0": 0.0, "T": 1.0, "n_steps": 50},
    "n_paths": 20000,
    "seed": 6,
    "expect": {"op": "iterated", "phi": "sum", "times": [0.5, 1.0],
               "lattice_step": 0.02, "cross_check_tol": 0.02},
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_expect(parse_config(cfg.str()));
  CHECK(r.ok);
  CHECK(r.metrics_json.find("cross_check_pass\":true") != std::string::npos);
}

TEST_CASE("cmd_bdg: three ratio rows, all passing on the default set") {
  const fs::path dir = fresh_dir("bdg");
  std::ostringstream cfg;
  cfg << R"({
    "model": {"b": "0", "h": "0", "sigma": "0", "K": "0"},
    "uncertainty": {"d": 1,
      "measures": [{"atoms": [[[1.0], 0.5], [[-1.0], 0.5]]},
                    {"atoms": [[[0.5], 0.5], [[-0.5], 0.5]]}],
      "drifts": [[0.0]],
      "vols": [[[0.8]], [[1.0]]],
      "base": 0},
    "grid": {"t0": 0.0, "T": 1.0, "n_steps": 100},
    "seed": 8,
    "bdg": {"n_paths": 4000},
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_bdg(parse_config(cfg.str()));
  CHECK(r.ok);
  const std::string csv = slurp(dir / "expect.csv");
  CHECK(csv.find("jump") != std::string::npos);
  CHECK(csv.find("brownian") != std::string::npos);
  CHECK(csv.find("covariation") != std::string::npos);
}

TEST_CASE("cmd_example51: small run emits every artifact; guard flags tiny batches") {
  const fs::path dir = fresh_dir("ex51_small");
  std::ostringstream cfg;
  cfg << R"({
    "model": "example51_amended",
    "grid": {"t0": 0.0, "T": 2.0, "n_steps": 400},
    "n_paths": 400,
    "seed": 14,
    "checkpoints": 21,
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_example51(parse_config(cfg.str()));
  for (const char* f : {"certificate.json", "decay.csv", "decay.svg", "report.json"})
    CHECK(fs::exists(dir / f));
  CHECK(r.metrics_json.find("lambda_hat") != std::string::npos);
  // l = 1 (to fp rounding of (1+r)^2 - 1) so the certificate rate is 2.
  {
    const auto metrics = nlohmann::json::parse(r.metrics_json);
    CHECK(metrics.at("decay_rate").get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  }

  // A 10-path run must flag oversized standard errors.
  const fs::path dir2 = fresh_dir("ex51_tiny");
  std::ostringstream tiny;
  tiny << R"({
    "model": "example51_amended",
    "grid": {"t0": 0.0, "T": 2.0, "n_steps": 400},
    "n_paths": 10,
    "seed": 14,
    "checkpoints": 21,
    "quiet": true,
    "out": ")" << dir2.string() << R"("
  })";
  const RunReport r2 = cmd_example51(parse_config(tiny.str()));
  CHECK(r2.metrics_json.find("\"se_too_large\":true") != std::string::npos);
}

TEST_CASE("cmd_example51: an explosive jump scale fails the certificate") {
  const fs::path dir = fresh_dir("ex51_explosive");
  std::ostringstream cfg;
  // 2r + r^2 = 3.5 -> decay rate 3 - 3.5 < 0. No simulation is attempted.
  cfg << R"({
    "model": "example51_amended",
    "jump_r": 1.1213203435596424,
    "grid": {"t0": 0.0, "T": 2.0, "n_steps": 200},
    "n_paths": 200,
    "seed": 15,
    "quiet": true,
    "out": ")" << dir.string() << R"("
  })";
  const RunReport r = cmd_example51(parse_config(cfg.str()));
  CHECK_FALSE(r.ok);
  const std::string cert = slurp(dir / "certificate.json");
  CHECK(cert.find("no positive decay rate") != std::string::npos);
}

TEST_CASE("determinism: reruns are byte-identical for any GLEVY_THREADS") {
  auto run = [&](const char* threads) {
    setenv("GLEVY_THREADS", threads, 1);
    const fs::path dir = fresh_dir("det");  // same path both times: identical config
    std::ostringstream cfg;
    cfg << R"({
      "model": "example51_amended",
      "grid": {"t0": 0.0, "T": 1.0, "n_steps": 200},
      "n_paths": 300,
      "seed": 99,
      "checkpoints": 11,
      "emit_paths": 2,
      "quiet": true,
      "out": ")" << dir.string() << R"("
    })";
    const ExperimentConfig parsed = parse_config(cfg.str());
    cmd_simulate(parsed);
    cmd_example51(parsed);
    auto bytes = dir_bytes(dir);
    unsetenv("GLEVY_THREADS");
    return bytes;
  };
  const auto one = run("1");
  const auto two = run("2");
  REQUIRE(one.size() == two.size());
  for (const auto& [name, bytes] : one) {
    REQUIRE(two.count(name) == 1);
    CHECK_MESSAGE(two.at(name) == bytes, "file differs: ", name);
  }
}
