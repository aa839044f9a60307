#include <glevy/uncertainty.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace glevy {

double JumpMeasure::mean_abs() const {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * points[i].norm();
  return s;
}

JumpMap make_transport_map(const JumpMeasure& base, const JumpMeasure& target) {
  if (base.size() != target.size())
    throw std::invalid_argument("transport map: atom counts differ");
  const std::size_t n = base.size();

  auto order_by_weight = [](const JumpMeasure& m) {
    std::vector<int> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return m.weights[a] < m.weights[b]; });
    return idx;
  };
  const std::vector<int> bi = order_by_weight(base);
  const std::vector<int> ti = order_by_weight(target);

  JumpMap map;
  map.assignment.assign(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(base.weights[bi[k]] - target.weights[ti[k]]) > kMassTolerance)
      throw std::invalid_argument("transport map: weight multisets do not match");
    map.assignment[bi[k]] = ti[k];
  }

  // Pushforward of the base weights must reproduce the target weights.
  std::vector<double> pushed(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) pushed[map.assignment[i]] += base.weights[i];
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(pushed[j] - target.weights[j]) > n * kMassTolerance)
      throw std::invalid_argument("transport map: pushforward does not match target");
  return map;
}

int UncertaintySet::dim() const {
  if (!drifts.empty()) return static_cast<int>(drifts.front().size());
  if (!jump_measures.empty()) return jump_measures.front().dim();
  return 0;
}

void UncertaintySet::finalize() {
  if (jump_measures.empty()) throw std::invalid_argument("uncertainty set: no jump measures");
  if (drifts.empty()) throw std::invalid_argument("uncertainty set: no drifts");
  if (volatilities.empty()) throw std::invalid_argument("uncertainty set: no volatilities");
  if (base_measure_index < 0 || base_measure_index >= static_cast<int>(jump_measures.size()))
    throw std::invalid_argument("uncertainty set: base measure index out of range");
  transport.clear();
  transport.reserve(jump_measures.size());
  for (const auto& m : jump_measures) transport.push_back(make_transport_map(base_measure(), m));
}

ValidationReport validate(const UncertaintySet& set) {
  ValidationReport r;
  auto fail = [&r](std::string msg) { r.errors.push_back(std::move(msg)); };

  if (set.jump_measures.empty()) fail("no jump measures");
  if (set.drifts.empty()) fail("no drifts");
  if (set.volatilities.empty()) fail("no volatilities");
  if (!r.errors.empty()) return r;

  const int d = set.dim();

  for (std::size_t m = 0; m < set.jump_measures.size(); ++m) {
    const auto& v = set.jump_measures[m];
    if (v.points.size() != v.weights.size() || v.points.empty()) {
      fail("measure " + std::to_string(m) + ": malformed atom list");
      r.masses.push_back(0.0);
      r.mean_abs_jump.push_back(0.0);
      continue;
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < v.points.size(); ++i) {
      if (v.points[i].size() != d)
        fail("measure " + std::to_string(m) + ": atom dimension mismatch");
      if (v.points[i].norm() == 0.0)
        fail("measure " + std::to_string(m) + ": atom at origin");
      if (v.weights[i] < 0.0)
        fail("measure " + std::to_string(m) + ": negative weight");
      mass += v.weights[i];
    }
    r.masses.push_back(mass);
    r.mean_abs_jump.push_back(v.mean_abs());
    if (std::abs(mass - 1.0) > kMassTolerance)
      fail("measure " + std::to_string(m) + ": total mass " + std::to_string(mass) + " != 1");
    if (!std::isfinite(v.mean_abs()))
      fail("measure " + std::to_string(m) + ": first absolute moment not finite");
  }

  for (std::size_t q = 0; q < set.volatilities.size(); ++q) {
    const Mat& Q = set.volatilities[q];
    bool sym = Q.rows() == d && Q.cols() == d;
    if (sym) sym = (Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff());
    r.symmetric.push_back(sym);
    if (!sym) {
      fail("volatility " + std::to_string(q) + ": not a symmetric d x d matrix");
      r.psd.push_back(false);
      r.strictly_pd.push_back(false);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    const bool psd = min_eig >= kPsdEigenvalueFloor;
    r.psd.push_back(psd);
    r.strictly_pd.push_back(min_eig > -kPsdEigenvalueFloor);
    if (!psd)
      fail("volatility " + std::to_string(q) + ": eigenvalue " + std::to_string(min_eig) +
           " below the PSD floor");
    if (psd && min_eig <= -kPsdEigenvalueFloor) r.has_degenerate_volatility = true;
  }

  for (const Vec& p : set.drifts)
    if (p.size() != d) fail("drift dimension mismatch");

  try {
    for (const auto& m : set.jump_measures) make_transport_map(set.base_measure(), m);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }

  double bound = 0.0;
  for (const auto& v : set.jump_measures)
    for (const auto& p : set.drifts)
      for (const auto& Q : set.volatilities) {
        if (p.size() != d || Q.rows() != d) continue;
        bound = std::max(bound, v.mean_abs() + p.norm() + (Q * Q.transpose()).trace());
      }
  r.moment_bound = bound;

  r.pass = r.errors.empty();
  return r;
}

double levy_khintchine_functional(const TestFunction& f, const UncertaintySet& set) {
  std::vector<double> jump_part(set.jump_measures.size(), 0.0);
  for (std::size_t m = 0; m < set.jump_measures.size(); ++m) {
    const auto& v = set.jump_measures[m];
    double s = 0.0;
    for (std::size_t i = 0; i < v.points.size(); ++i) s += v.weights[i] * f.value(v.points[i]);
    jump_part[m] = s;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < set.jump_measures.size(); ++m)
    for (const Vec& p : set.drifts)
      for (const Mat& Q : set.volatilities) {
        const double val =
            jump_part[m] + f.gradient0.dot(p) + 0.5 * (f.hessian0 * Q * Q.transpose()).trace();
        best = std::max(best, val);
      }
  return best;
}

int ControlPath::interval_at(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  int k = static_cast<int>(it - times.begin()) - 1;
  if (k < 0) k = 0;
  const int last = static_cast<int>(triples.size()) - 1;
  if (k > last) k = last;
  return k;
}

void ControlPath::validate_against(const UncertaintySet& set) const {
  if (times.size() < 2 || triples.size() + 1 != times.size())
    throw std::invalid_argument("control: times/triples size mismatch");
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    if (!(times[k] < times[k + 1]))
      throw std::invalid_argument("control: times not strictly increasing");
  for (const TripleIndex& ti : triples) {
    if (ti.measure < 0 || ti.measure >= static_cast<int>(set.jump_measures.size()) ||
        ti.drift < 0 || ti.drift >= static_cast<int>(set.drifts.size()) || ti.vol < 0 ||
        ti.vol >= static_cast<int>(set.volatilities.size()))
      throw std::invalid_argument("control: triple index out of range");
  }
}

std::vector<ControlPath> extreme_controls(const UncertaintySet& set, const TimeGrid& grid) {
  std::vector<ControlPath> out;
  out.reserve(set.n_triples());
  for (int m = 0; m < static_cast<int>(set.jump_measures.size()); ++m)
    for (int p = 0; p < static_cast<int>(set.drifts.size()); ++p)
      for (int q = 0; q < static_cast<int>(set.volatilities.size()); ++q) {
        ControlPath c;
        c.times = {grid.t0, grid.T};
        c.triples = {TripleIndex{m, p, q}};
        c.id = "const[v" + std::to_string(m) + ",p" + std::to_string(p) + ",q" +
               std::to_string(q) + "]";
        out.push_back(std::move(c));
      }
  return out;
}

std::string to_json_string(const UncertaintySet& set, int indent) {
  nlohmann::json j;
  j["d"] = set.dim();
  auto& measures = j["measures"] = nlohmann::json::array();
  for (const auto& m : set.jump_measures) {
    nlohmann::json atoms = nlohmann::json::array();
    for (std::size_t i = 0; i < m.points.size(); ++i) {
      nlohmann::json z = nlohmann::json::array();
      for (int c = 0; c < m.points[i].size(); ++c) z.push_back(m.points[i][c]);
      atoms.push_back(nlohmann::json::array({z, m.weights[i]}));
    }
    measures.push_back({{"atoms", atoms}});
  }
  auto& drifts = j["drifts"] = nlohmann::json::array();
  for (const Vec& p : set.drifts) {
    nlohmann::json v = nlohmann::json::array();
    for (int c = 0; c < p.size(); ++c) v.push_back(p[c]);
    drifts.push_back(v);
  }
  auto& vols = j["vols"] = nlohmann::json::array();
  for (const Mat& Q : set.volatilities) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < Q.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < Q.cols(); ++c) row.push_back(Q(r, c));
      rows.push_back(row);
    }
    vols.push_back(rows);
  }
  j["base"] = set.base_measure_index;
  return j.dump(indent);
}

UncertaintySet uncertainty_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  for (const auto& [key, _] : j.items())
    if (key != "d" && key != "measures" && key != "drifts" && key != "vols" && key != "base")
      throw ConfigError("uncertainty set: unknown key '" + key + "'");

  UncertaintySet set;
  const int d = j.at("d").get<int>();
  if (d <= 0) throw ConfigError("uncertainty set: d must be positive");

  for (const auto& jm : j.at("measures")) {
    JumpMeasure m;
    for (const auto& atom : jm.at("atoms")) {
      if (!atom.is_array() || atom.size() != 2)
        throw ConfigError("uncertainty set: each atom must be [[z...], w]");
      const auto& z = atom[0];
      if (static_cast<int>(z.size()) != d)
        throw ConfigError("uncertainty set: atom dimension != d");
      Vec point(d);
      for (int c = 0; c < d; ++c) point[c] = z[c].get<double>();
      m.points.push_back(point);
      m.weights.push_back(atom[1].get<double>());
    }
    set.jump_measures.push_back(std::move(m));
  }
  for (const auto& jp : j.at("drifts")) {
    if (static_cast<int>(jp.size()) != d) throw ConfigError("uncertainty set: drift dimension != d");
    Vec p(d);
    for (int c = 0; c < d; ++c) p[c] = jp[c].get<double>();
    set.drifts.push_back(p);
  }
  for (const auto& jq : j.at("vols")) {
    if (static_cast<int>(jq.size()) != d) throw ConfigError("uncertainty set: vol must be d x d");
    Mat Q(d, d);
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(jq[r].size()) != d)
        throw ConfigError("uncertainty set: vol must be d x d");
      for (int c = 0; c < d; ++c) Q(r, c) = jq[r][c].get<double>();
    }
    set.volatilities.push_back(Q);
  }
  set.base_measure_index = j.value("base", 0);
  set.finalize();
  return set;
}

UncertaintySet load_uncertainty(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open uncertainty file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return uncertainty_from_json(ss.str());
}

}  // namespace glevy
