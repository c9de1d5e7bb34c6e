#pragma once

// Artifact emission: the JSON run report, CSV writers for paths and grid
// snapshots, and the snapshot manifest. Floating-point values are written
// with 17 significant digits so identical runs emit identical bytes; the
// wall-clock field is the single intentionally non-reproducible entry.

#include <string>
#include <utility>
#include <vector>

#include "gsde/grid.hpp"
#include "gsde/types.hpp"

namespace gsde {

struct MetricRow {
  std::string name;
  double level = 0.0;  // refinement level that produced the row (h, cells, ...)
  double value = 0.0;
};

struct Verdict {
  std::string name;
  bool pass = false;
};

struct RunReport {
  std::string command;
  std::string scenario;
  std::vector<std::pair<std::string, std::string>> config;  // resolved settings, in order
  std::string noise_checksum;
  std::vector<MetricRow> metrics;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  double wall_clock_ms = 0.0;

  bool pass() const;
  void add_metric(const std::string& name, double level, double value);
  void add_verdict(const std::string& name, bool pass);
};

/// 17-significant-digit decimal text; round-trips any double exactly.
std::string format_full(double v);

void save_report_json(const RunReport& rep, const std::string& path);

/// Node-per-row CSV: coordinates then value, plus a header line describing
/// the grid and the snapshot time.
void save_density_csv(const GridDensity& d, const std::string& path);

/// File name pattern shared by snapshot exports: density_<time%.6f>.csv.
std::string density_file_name(double time);

/// Writes every snapshot plus densities_manifest.json listing them; returns
/// the emitted file names (manifest last).
std::vector<std::string> save_density_series(const std::vector<GridDensity>& snaps,
                                             const std::string& dir);

}  // namespace gsde
