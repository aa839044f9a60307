#pragma once

// Artifact emission. All numeric formatting is fixed (%.17g for CSV, %.6g for
// SVG) and every writer is deterministic so reruns are byte-identical.
// Timing is printed to the console, never into files.

#include <glevy/types.hpp>

#include <string>
#include <vector>

namespace glevy {

std::string format_full(double v);  // %.17g

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);

struct DecayCurve {
  std::string label;
  std::vector<double> times;
  std::vector<double> values;  // positive; plotted on a log scale
};

/// Self-contained SVG: log(value) vs t polylines plus a dashed reference line
/// of slope -decay_rate anchored at the first point of the first curve.
void write_decay_svg(const std::string& path, const std::vector<DecayCurve>& curves,
                     double decay_rate);

struct RunReport {
  std::string command;
  std::string config_echo;             // original config document
  double wall_seconds = 0.0;           // console only; not serialized
  std::vector<std::string> artifacts;  // files written, relative to out dir
  std::string metrics_json;            // command-specific summary (JSON object)
  bool ok = true;
  std::vector<std::string> failures;
};

/// Writes report.json (config echo, artifacts, metrics, failures). Wall time
/// is deliberately left out so reruns diff clean.
void write_report(const std::string& path, const RunReport& report);

void ensure_directory(const std::string& path);

}  // namespace glevy
