#include "gsde/report.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace gsde {

bool RunReport::pass() const {
  for (const Verdict& v : verdicts)
    if (!v.pass) return false;
  return true;
}

void RunReport::add_metric(const std::string& name, double level, double value) {
  metrics.push_back(MetricRow{name, level, value});
}

void RunReport::add_verdict(const std::string& name, bool p) {
  verdicts.push_back(Verdict{name, p});
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_report_json(const RunReport& rep, const std::string& path) {
  nlohmann::ordered_json j;
  j["command"] = rep.command;
  j["scenario"] = rep.scenario;
  nlohmann::ordered_json cfg;
  for (const auto& [key, value] : rep.config) cfg[key] = value;
  j["config"] = cfg;
  j["noise_checksum"] = rep.noise_checksum;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
  for (const MetricRow& m : rep.metrics) {
    nlohmann::ordered_json row;
    row["name"] = m.name;
    row["level"] = m.level;
    row["value"] = m.value;
    metrics.push_back(row);
  }
  j["metrics"] = metrics;
  nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
  for (const Verdict& v : rep.verdicts) {
    nlohmann::ordered_json row;
    row["name"] = v.name;
    row["pass"] = v.pass;
    verdicts.push_back(row);
  }
  j["verdicts"] = verdicts;
  j["notes"] = rep.notes;
  j["pass"] = rep.pass();
  j["wall_clock_ms"] = rep.wall_clock_ms;

  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

void save_density_csv(const GridDensity& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  const GridSpec& g = d.grid;
  out << "# grid dim=" << g.dim();
  out << " lo=";
  for (int k = 0; k < g.dim(); ++k) out << (k ? ";" : "") << format_full(g.lo(k));
  out << " hi=";
  for (int k = 0; k < g.dim(); ++k) out << (k ? ";" : "") << format_full(g.hi(k));
  out << " cells=";
  for (int k = 0; k < g.dim(); ++k) out << (k ? ";" : "") << g.cells(k);
  out << " time=" << format_full(d.time) << "\n";
  for (int k = 0; k < g.dim(); ++k) out << "x" << (k + 1) << ",";
  out << "value\n";
  for (long f = 0; f < g.total_nodes(); ++f) {
    const Vec x = g.node_coord(f);
    for (int k = 0; k < g.dim(); ++k) out << format_full(x[k]) << ",";
    out << format_full(d.values[f]) << "\n";
  }
}

std::string density_file_name(double time) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "density_%.6f.csv", time);
  return buf;
}

std::vector<std::string> save_density_series(const std::vector<GridDensity>& snaps,
                                             const std::string& dir) {
  std::vector<std::string> files;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const GridDensity& d : snaps) {
    const std::string name = density_file_name(d.time);
    save_density_csv(d, dir + "/" + name);
    files.push_back(name);
    nlohmann::ordered_json row;
    row["time"] = d.time;
    row["file"] = name;
    manifest.push_back(row);
  }
  std::ofstream out(dir + "/densities_manifest.json");
  if (!out) throw Error("cannot open densities manifest for writing");
  out << manifest.dump(2) << "\n";
  files.push_back("densities_manifest.json");
  return files;
}

}  // namespace gsde
