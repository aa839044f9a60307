#include <glevy/report.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace glevy {

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

}  // namespace

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream os = open_out(path);
  for (std::size_t c = 0; c < table.header.size(); ++c)
    os << (c ? "," : "") << table.header[c];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
}

void write_decay_svg(const std::string& path, const std::vector<DecayCurve>& curves,
                     double decay_rate) {
  if (curves.empty()) throw std::invalid_argument("write_decay_svg: no curves");
  const int width = 820, height = 520;
  const int ml = 70, mr = 20, mt = 20, mb = 50;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  double t_lo = curves[0].times.front(), t_hi = curves[0].times.back();
  double v_lo = 1e300, v_hi = -1e300;
  for (const DecayCurve& c : curves)
    for (double v : c.values)
      if (v > 0.0) {
        v_lo = std::min(v_lo, std::log(v));
        v_hi = std::max(v_hi, std::log(v));
      }
  if (v_hi <= v_lo) v_hi = v_lo + 1.0;
  const double pad = 0.05 * (v_hi - v_lo);
  v_lo -= pad;
  v_hi += pad;

  auto px = [&](double t) { return ml + (t - t_lo) / (t_hi - t_lo) * plot_w; };
  auto py = [&](double lv) { return mt + (v_hi - lv) / (v_hi - v_lo) * plot_h; };

  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ofstream os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g font-family=\"monospace\" font-size=\"12\">\n";

  // Axes with ticks.
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
     << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double t = t_lo + (t_hi - t_lo) * k / 5.0;
    os << "<line x1=\"" << format_short(px(t)) << "\" y1=\"" << mt + plot_h << "\" x2=\""
       << format_short(px(t)) << "\" y2=\"" << mt + plot_h + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << format_short(px(t)) << "\" y=\"" << mt + plot_h + 20
       << "\" text-anchor=\"middle\">" << format_short(t) << "</text>\n";
    const double lv = v_lo + (v_hi - v_lo) * k / 5.0;
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << format_short(py(lv)) << "\" x2=\"" << ml
       << "\" y2=\"" << format_short(py(lv)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << format_short(py(lv) + 4)
       << "\" text-anchor=\"end\">" << format_short(lv) << "</text>\n";
  }
  os << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\">t</text>\n";
  os << "<text x=\"15\" y=\"" << mt + plot_h / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << mt + plot_h / 2
     << ")\">log mean-square</text>\n";

  // Reference line of slope -decay_rate anchored at the first curve point.
  {
    const double anchor_t = curves[0].times.front();
    const double anchor_v = std::log(std::max(curves[0].values.front(), 1e-300));
    const double end_v = anchor_v - decay_rate * (t_hi - anchor_t);
    os << "<line x1=\"" << format_short(px(anchor_t)) << "\" y1=\"" << format_short(py(anchor_v))
       << "\" x2=\"" << format_short(px(t_hi)) << "\" y2=\"" << format_short(py(end_v))
       << "\" stroke=\"#444444\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 14 << "\">reference slope -"
       << format_short(decay_rate) << "</text>\n";
  }

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const DecayCurve& c = curves[ci];
    os << "<polyline fill=\"none\" stroke=\"" << colors[ci % std::size(colors)]
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      if (!(c.values[i] > 0.0)) continue;
      os << format_short(px(c.times[i])) << ',' << format_short(py(std::log(c.values[i]))) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 30 + 16 * ci << "\" fill=\""
       << colors[ci % std::size(colors)] << "\">" << c.label << "</text>\n";
  }
  os << "</g>\n</svg>\n";
}

void write_report(const std::string& path, const RunReport& report) {
  nlohmann::json j;
  j["command"] = report.command;
  j["ok"] = report.ok;
  j["artifacts"] = report.artifacts;
  j["failures"] = report.failures;
  j["config"] = nlohmann::json::parse(report.config_echo.empty() ? "{}" : report.config_echo);
  j["metrics"] = nlohmann::json::parse(report.metrics_json.empty() ? "{}" : report.metrics_json);
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
}

}  // namespace glevy
