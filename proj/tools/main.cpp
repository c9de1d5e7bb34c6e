// Command-line laboratory for jump-diffusion systems: path simulation,
// sensitivity propagation, density transport, field composition checks,
// first-integral certification and refinement studies over the built-in
// scenario registry.
//
// Exit codes: 0 = run passed, 2 = a checked property failed, 1 = usage or
// solver error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsde/grid.hpp"
#include "gsde/integral_check.hpp"
#include "gsde/jacobian.hpp"
#include "gsde/kernel.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"
#include "gsde/report.hpp"
#include "gsde/rng.hpp"
#include "gsde/scenarios.hpp"
#include "gsde/simulate.hpp"
#include "gsde/wentzell.hpp"

namespace {

using gsde::Vec;

struct Options {
  std::string scenario = "rotation-jump";
  std::uint64_t seed = 12345;
  double horizon = -1.0;  // negative = scenario default
  int steps = 0;          // 0 = derive from scenario default step
  int paths = 100;
  std::string grid;  // "", "N", "NxM" or "lo:hi:cells[,lo:hi:cells]"
  std::vector<double> levels;
  std::string pipeline = "invariant";
  double tol = 1e-10;
  double perturb_drift = 0.0;
  std::string out = "out";
};

gsde::GridSpec parse_grid(const std::string& text, const gsde::GridSpec& fallback) {
  if (text.empty()) return fallback;
  if (text.find(':') != std::string::npos) {
    Vec lo(0), hi(0);
    std::vector<int> cells;
    std::vector<double> los, his;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t next = text.find(',', pos);
      const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
      double a = 0.0, b = 0.0;
      int c = 0;
      if (std::sscanf(tok.c_str(), "%lf:%lf:%d", &a, &b, &c) != 3)
        throw gsde::InvalidDiscretization("bad grid token: " + tok);
      los.push_back(a);
      his.push_back(b);
      cells.push_back(c);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    lo.resize(static_cast<Eigen::Index>(los.size()));
    hi.resize(static_cast<Eigen::Index>(his.size()));
    for (std::size_t d = 0; d < los.size(); ++d) {
      lo[static_cast<Eigen::Index>(d)] = los[d];
      hi[static_cast<Eigen::Index>(d)] = his[d];
    }
    return gsde::GridSpec(lo, hi, cells);
  }
  // Cell counts on the fallback bounds: "N" or "NxM".
  std::vector<int> cells;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('x', pos);
    const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
    try {
      cells.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw gsde::InvalidDiscretization("bad grid token: " + tok);
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (static_cast<int>(cells.size()) == 1 && fallback.dim() > 1)
    cells.assign(static_cast<std::size_t>(fallback.dim()), cells[0]);
  if (static_cast<int>(cells.size()) != fallback.dim())
    throw gsde::InvalidDiscretization("grid cell list does not match the scenario dimension");
  Vec lo(fallback.dim()), hi(fallback.dim());
  for (int d = 0; d < fallback.dim(); ++d) {
    lo[d] = fallback.lo(d);
    hi[d] = fallback.hi(d);
  }
  return gsde::GridSpec(lo, hi, cells);
}

std::string grid_text(const gsde::GridSpec& g) {
  std::string s;
  for (int d = 0; d < g.dim(); ++d) {
    if (d) s += ",";
    s += gsde::format_full(g.lo(d)) + ":" + gsde::format_full(g.hi(d)) + ":" +
         std::to_string(g.cells(d));
  }
  return s;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double lsq_slope(const std::vector<double>& lx, const std::vector<double>& ly) {
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(lx.size());
  for (double v : lx) mx += v;
  for (double v : ly) my += v;
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct Resolved {
  gsde::Scenario scenario;
  gsde::SdeSystem system;  // possibly drift-perturbed
  double T = 0.0;
  double h = 0.0;
  int steps = 0;
};

Resolved resolve(const Options& opt) {
  Resolved r;
  r.scenario = gsde::make_scenario(opt.scenario);
  r.system = opt.perturb_drift != 0.0
                 ? gsde::with_drift_perturbation(r.scenario.system, opt.perturb_drift)
                 : r.scenario.system;
  r.T = opt.horizon > 0.0 ? opt.horizon : r.scenario.default_T;
  r.steps = opt.steps > 0 ? opt.steps
                          : static_cast<int>(std::llround(r.T / r.scenario.default_h));
  if (r.steps <= 0) throw gsde::InvalidDiscretization("step count must be positive");
  r.h = r.T / r.steps;
  return r;
}

void echo_config(gsde::RunReport& rep, const Options& opt, const Resolved& r) {
  rep.config.emplace_back("scenario", opt.scenario);
  rep.config.emplace_back("seed", std::to_string(opt.seed));
  rep.config.emplace_back("horizon", gsde::format_full(r.T));
  rep.config.emplace_back("steps", std::to_string(r.steps));
  rep.config.emplace_back("step_size", gsde::format_full(r.h));
  rep.config.emplace_back("paths", std::to_string(opt.paths));
  rep.config.emplace_back("tol", gsde::format_full(opt.tol));
  rep.config.emplace_back("perturb_drift", gsde::format_full(opt.perturb_drift));
  rep.config.emplace_back("out", opt.out);
  if (!opt.levels.empty()) {
    std::string ls;
    for (double v : opt.levels) {
      if (!ls.empty()) ls += " ";
      ls += gsde::format_full(v);
    }
    rep.config.emplace_back("levels", ls);
  }
}

int cmd_simulate(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  gsde::RunReport rep;
  rep.command = "simulate";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);

  double sup_dev_sum = 0.0;
  int survivors = 0;
  gsde::Path first_path;
  std::string checksum;
  for (int p = 0; p < opt.paths; ++p) {
    const gsde::NoiseRealization noise =
        gsde::generate_noise({opt.seed, static_cast<std::uint64_t>(p)}, r.T, r.h,
                             r.system.m, r.system.measure);
    if (p == 0) checksum = gsde::checksum_hex(noise);
    const gsde::Path path = gsde::integrate_path(r.system, r.scenario.x0, noise);
    if (p == 0) first_path = path;
    if (r.scenario.has_candidate) {
      const double u0 = r.scenario.candidate(0.0, r.scenario.x0);
      double sup = 0.0;
      for (std::size_t i = 0; i < path.times.size(); ++i)
        sup = std::max(sup, std::abs(r.scenario.candidate(path.times[i], path.state_at(i)) - u0));
      sup_dev_sum += sup / (std::abs(u0) > 1e-8 ? std::abs(u0) : 1.0);
    }
    ++survivors;
  }
  rep.noise_checksum = checksum;
  gsde::save_path_csv(first_path, opt.out + "/paths.csv");
  const Vec xT = first_path.state_at(first_path.times.size() - 1);
  for (int d = 0; d < r.system.n; ++d)
    rep.add_metric("final_state_" + std::to_string(d + 1), r.h, xT[d]);
  if (r.scenario.has_candidate && survivors > 0)
    rep.add_metric("mean_sup_invariant_deviation", r.h, sup_dev_sum / survivors);
  rep.add_metric("paths_completed", r.h, survivors);
  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return 0;
}

int cmd_jacobian(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  gsde::RunReport rep;
  rep.command = "jacobian";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);

  const gsde::NoiseRealization noise =
      gsde::generate_noise({opt.seed, 0}, r.T, r.h, r.system.m, r.system.measure);
  rep.noise_checksum = gsde::checksum_hex(noise);
  const gsde::Path path = gsde::integrate_path(r.system, r.scenario.x0, noise);
  const gsde::JacobianPath jac = gsde::integrate_jacobian(r.system, path, noise);
  gsde::save_jacobian_csv(jac, opt.out + "/jacobian.csv");

  double min_abs_det = std::abs(jac.dets.front());
  for (double d : jac.dets) min_abs_det = std::min(min_abs_det, std::abs(d));
  rep.add_metric("final_det", r.h, jac.dets.back());
  rep.add_metric("min_abs_det", r.h, min_abs_det);
  rep.add_verdict("jacobian_nondegenerate", min_abs_det > 1e-12);
  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return rep.pass() ? 0 : 2;
}

int cmd_kernel(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  if (r.scenario.kernel_seeds.empty())
    throw gsde::InvalidDiscretization("scenario has no seeded density");
  const gsde::GridSpec grid = parse_grid(opt.grid, r.scenario.default_grid);

  gsde::RunReport rep;
  rep.command = "kernel";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);
  rep.config.emplace_back("grid", grid_text(grid));

  const auto& [center, sigma] = r.scenario.kernel_seeds.front();
  const gsde::GridDensity rho0 = gsde::gaussian_density(grid, center, sigma);
  const gsde::NoiseRealization noise =
      gsde::generate_noise({opt.seed, 0}, r.T, r.h, r.system.m, r.system.measure);
  rep.noise_checksum = gsde::checksum_hex(noise);

  gsde::KernelOptions kopts;
  kopts.snapshot_stride = std::max(1, r.steps / 8);
  const gsde::KernelRunResult run = gsde::evolve_kernel(r.system, rho0, noise, kopts);

  gsde::save_density_series(run.snapshots, opt.out);
  for (const gsde::GridDensity& d : run.snapshots)
    rep.add_metric("mass", d.time, gsde::check_normalization(d));
  rep.add_metric("min_node_value", r.h, run.min_value);
  rep.add_metric("final_mass_drift", r.h,
                 std::abs(run.mass_series.back() - run.mass_series.front()));
  rep.add_verdict("mass_conserved", !run.mass_loss);
  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return rep.pass() ? 0 : 2;
}

int cmd_wentzell(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  if (!r.scenario.has_field)
    throw gsde::InvalidDiscretization("scenario carries no field system");

  std::vector<double> levels = opt.levels;
  if (levels.empty()) levels = {8.0 * r.h, 4.0 * r.h, 2.0 * r.h, r.h};

  gsde::RunReport rep;
  rep.command = "wentzell";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);
  rep.config.emplace_back("grid", grid_text(r.scenario.field_grid));

  const double h_fine = levels.back();
  std::vector<double> mean_gap(levels.size(), 0.0);
  std::vector<int> counted(levels.size(), 0);
  std::string checksum;
  for (int p = 0; p < opt.paths; ++p) {
    const gsde::NoiseRealization fine =
        gsde::generate_noise({opt.seed, static_cast<std::uint64_t>(p)}, r.T, h_fine,
                             r.system.m, r.system.measure);
    if (p == 0) checksum = gsde::checksum_hex(fine);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const gsde::NoiseRealization noise =
          l + 1 == levels.size() ? fine : gsde::refine_noise(levels[l], fine);
      const gsde::WentzellComparison cmp = gsde::run_wentzell_comparison(
          r.system, r.scenario.field, r.scenario.field_grid, r.scenario.field_init,
          r.scenario.x0, noise);
      const Eigen::Index last = cmp.formula.rows() - 1;
      mean_gap[l] += (cmp.formula.row(last) - cmp.direct.row(last)).cwiseAbs().maxCoeff();
      ++counted[l];
    }
  }
  rep.noise_checksum = checksum;

  std::vector<double> lx, ly;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (counted[l] == 0) continue;
    mean_gap[l] /= counted[l];
    rep.add_metric("mean_final_gap", levels[l], mean_gap[l]);
    if (mean_gap[l] > 0.0) {
      lx.push_back(std::log(levels[l]));
      ly.push_back(std::log(mean_gap[l]));
    }
  }
  const bool exact = lx.size() < 2;
  const double order = exact ? 0.0 : lsq_slope(lx, ly);
  if (exact) {
    rep.notes.push_back("order: exact (all gaps vanish)");
  } else {
    rep.add_metric("fitted_order", h_fine, order);
    rep.add_verdict("order_at_least_0.4", order >= 0.4);
  }

  nlohmann::ordered_json j;
  j["scenario"] = opt.scenario;
  j["paths"] = opt.paths;
  j["noise_checksum"] = checksum;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    nlohmann::ordered_json row;
    row["h"] = levels[l];
    row["mean_final_gap"] = mean_gap[l];
    rows.push_back(row);
  }
  j["levels"] = rows;
  if (exact)
    j["fitted_order"] = "exact";
  else
    j["fitted_order"] = order;
  std::ofstream out(opt.out + "/wentzell_compare.json");
  if (!out) throw gsde::Error("cannot open wentzell_compare.json for writing");
  out << j.dump(2) << "\n";

  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return rep.pass() ? 0 : 2;
}

int cmd_certify(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  if (!r.scenario.has_candidate)
    throw gsde::InvalidDiscretization("scenario carries no first-integral candidate");

  gsde::RunReport rep;
  rep.command = "certify";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);

  // Conditions over a coarse sweep grid and five time slices.
  gsde::GridSpec fallback = r.scenario.default_grid;
  {
    Vec lo(fallback.dim()), hi(fallback.dim());
    std::vector<int> cells(static_cast<std::size_t>(fallback.dim()), 40);
    for (int d = 0; d < fallback.dim(); ++d) {
      lo[d] = fallback.lo(d);
      hi[d] = fallback.hi(d);
    }
    fallback = gsde::GridSpec(lo, hi, cells);
  }
  const gsde::GridSpec check_grid = parse_grid(opt.grid, fallback);
  rep.config.emplace_back("grid", grid_text(check_grid));
  std::vector<double> times;
  for (int q = 0; q <= 4; ++q) times.push_back(r.T * q / 4.0);

  const gsde::ConditionReport cond =
      gsde::check_conditions(r.system, r.scenario.candidate, check_grid, times, opt.tol);

  // Constancy along simulated paths with coupled refinement.
  std::vector<double> levels = opt.levels;
  if (levels.empty()) levels = {4.0 * r.h, 2.0 * r.h, r.h};
  const gsde::ConstancyStats stats = gsde::monte_carlo_constancy(
      r.system, r.scenario.candidate, {r.scenario.x0}, opt.seed, opt.paths, r.T, levels);

  rep.add_metric("c1_max", 0.0, cond.wiener.max);
  rep.add_metric("c2_max", 0.0, cond.drift.max);
  rep.add_metric("c3_max", 0.0, cond.jump.max);
  for (const gsde::ConstancyLevel& lev : stats.levels) {
    rep.add_metric("mc_mean_sup", lev.h, lev.mean_sup);
    rep.add_metric("mc_blowups", lev.h, lev.blowups);
  }
  rep.add_metric("mc_fitted_order", levels.back(), stats.fitted_order);
  if (stats.exact) rep.notes.push_back("constancy: exact (deviations at machine zero)");

  rep.add_verdict("wiener_compensation", cond.wiener.pass);
  rep.add_verdict("drift_compensation", cond.drift.pass);
  rep.add_verdict("jump_compensation", cond.jump.pass);
  rep.add_verdict("mc_no_plateau", !stats.plateau);

  nlohmann::ordered_json j;
  j["scenario"] = opt.scenario;
  j["tolerance"] = opt.tol;
  j["perturb_drift"] = opt.perturb_drift;
  auto cond_json = [](const gsde::ConditionStats& st) {
    nlohmann::ordered_json c;
    c["max"] = st.max;
    c["mean"] = st.mean;
    c["argmax_time"] = st.argmax_time;
    c["argmax_point"] = std::vector<double>(st.argmax_point.data(),
                                            st.argmax_point.data() + st.argmax_point.size());
    if (st.argmax_mark.size() > 0)
      c["argmax_mark"] = std::vector<double>(st.argmax_mark.data(),
                                             st.argmax_mark.data() + st.argmax_mark.size());
    c["pass"] = st.pass;
    return c;
  };
  j["conditions"]["wiener"] = cond_json(cond.wiener);
  j["conditions"]["drift"] = cond_json(cond.drift);
  j["conditions"]["jump"] = cond_json(cond.jump);
  j["conditions"]["overall_pass"] = cond.overall_pass;
  j["conditions"]["nodes_evaluated"] = cond.nodes_evaluated;
  j["conditions"]["nodes_failed"] = cond.nodes_failed;
  nlohmann::ordered_json lev_rows = nlohmann::ordered_json::array();
  for (const gsde::ConstancyLevel& lev : stats.levels) {
    nlohmann::ordered_json row;
    row["h"] = lev.h;
    row["mean_sup"] = lev.mean_sup;
    row["median_sup"] = lev.median_sup;
    row["max_sup"] = lev.max_sup;
    row["blowups"] = lev.blowups;
    lev_rows.push_back(row);
  }
  j["constancy"]["levels"] = lev_rows;
  j["constancy"]["fitted_order"] = stats.fitted_order;
  j["constancy"]["exact"] = stats.exact;
  j["constancy"]["plateau"] = stats.plateau;
  j["pass"] = cond.overall_pass && !stats.plateau;
  std::ofstream out(opt.out + "/certify.json");
  if (!out) throw gsde::Error("cannot open certify.json for writing");
  out << j.dump(2) << "\n";

  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return rep.pass() ? 0 : 2;
}

int cmd_converge(const Options& opt) {
  const Clock::time_point t_start = Clock::now();
  const Resolved r = resolve(opt);
  if (opt.levels.size() < 3)
    throw gsde::InvalidDiscretization("converge needs at least 3 levels");

  gsde::RunReport rep;
  rep.command = "converge";
  rep.scenario = opt.scenario;
  echo_config(rep, opt, r);
  rep.config.emplace_back("pipeline", opt.pipeline);

  std::vector<double> errors;   // per level
  std::vector<double> axis;     // h or dx per level

  if (opt.pipeline == "invariant") {
    if (!r.scenario.has_candidate)
      throw gsde::InvalidDiscretization("scenario carries no first-integral candidate");
    const gsde::ConstancyStats stats = gsde::monte_carlo_constancy(
        r.system, r.scenario.candidate, {r.scenario.x0}, opt.seed, opt.paths, r.T,
        opt.levels);
    for (const gsde::ConstancyLevel& lev : stats.levels) {
      rep.add_metric("mean_sup_deviation", lev.h, lev.mean_sup);
      errors.push_back(lev.mean_sup);
      axis.push_back(lev.h);
    }
  } else if (opt.pipeline == "kernel") {
    // Analytic-translate comparison; meaningful for scenarios whose density
    // moves rigidly (zero diffusion and jumps, constant drift).
    const Vec a0 = r.system.a(0.0, r.scenario.x0);
    for (double raw : opt.levels) {
      const int cells = static_cast<int>(std::llround(raw));
      gsde::GridSpec base = r.scenario.default_grid;
      Vec lo(base.dim()), hi(base.dim());
      for (int d = 0; d < base.dim(); ++d) {
        lo[d] = base.lo(d);
        hi[d] = base.hi(d);
      }
      const gsde::GridSpec grid(lo, hi, std::vector<int>(
                                            static_cast<std::size_t>(base.dim()), cells));
      const double dx = grid.spacing(0);
      const double h = r.T / std::max(1.0, std::ceil(r.T / (0.4 * dx)));
      const auto& [center, sigma] = r.scenario.kernel_seeds.front();
      auto gauss = [&](const Vec& x, const Vec& shift) {
        return std::exp(-(x - center - shift).squaredNorm() / (2.0 * sigma * sigma));
      };
      const gsde::GridDensity raw0 = gsde::make_grid_density(
          grid, [&](const Vec& x) { return gauss(x, Vec::Zero(grid.dim())); }, false);
      const double z0 = gsde::grid_mass(raw0);
      gsde::GridDensity rho0{grid, raw0.values / z0, 0.0};
      const gsde::NoiseRealization noise = gsde::generate_noise(
          {opt.seed, 0}, r.T, h, r.system.m, r.system.measure);
      const gsde::KernelRunResult run = gsde::evolve_kernel(r.system, rho0, noise);
      const gsde::GridDensity exact = gsde::make_grid_density(
          grid, [&](const Vec& x) { return gauss(x, Vec(r.T * a0)) / z0; }, false);
      double l1 = 0.0;
      {
        std::vector<int> mi(static_cast<std::size_t>(grid.dim()));
        for (long f = 0; f < grid.total_nodes(); ++f) {
          grid.multi_index(f, mi);
          l1 += grid.quad_weight(mi) *
                std::abs(run.snapshots.back().values[f] - exact.values[f]);
        }
      }
      rep.add_metric("l1_error", cells, l1);
      errors.push_back(l1);
      axis.push_back(dx);
    }
  } else if (opt.pipeline == "wentzell") {
    if (!r.scenario.has_field)
      throw gsde::InvalidDiscretization("scenario carries no field system");
    const double h_fine = opt.levels.back();
    std::vector<double> mean_gap(opt.levels.size(), 0.0);
    for (int p = 0; p < opt.paths; ++p) {
      const gsde::NoiseRealization fine =
          gsde::generate_noise({opt.seed, static_cast<std::uint64_t>(p)}, r.T, h_fine,
                               r.system.m, r.system.measure);
      for (std::size_t l = 0; l < opt.levels.size(); ++l) {
        const gsde::NoiseRealization noise =
            l + 1 == opt.levels.size() ? fine : gsde::refine_noise(opt.levels[l], fine);
        const gsde::WentzellComparison cmp = gsde::run_wentzell_comparison(
            r.system, r.scenario.field, r.scenario.field_grid, r.scenario.field_init,
            r.scenario.x0, noise);
        const Eigen::Index last = cmp.formula.rows() - 1;
        mean_gap[l] +=
            (cmp.formula.row(last) - cmp.direct.row(last)).cwiseAbs().maxCoeff();
      }
    }
    for (std::size_t l = 0; l < opt.levels.size(); ++l) {
      mean_gap[l] /= opt.paths;
      rep.add_metric("mean_final_gap", opt.levels[l], mean_gap[l]);
      errors.push_back(mean_gap[l]);
      axis.push_back(opt.levels[l]);
    }
  } else {
    throw gsde::InvalidDiscretization("unknown pipeline: " + opt.pipeline);
  }

  std::vector<double> lx, ly;
  for (std::size_t l = 0; l < errors.size(); ++l) {
    if (errors[l] > 0.0) {
      lx.push_back(std::log(axis[l]));
      ly.push_back(std::log(errors[l]));
    }
  }
  if (lx.size() < 2) {
    rep.notes.push_back("order: exact (errors vanish at every level)");
  } else {
    const double order = lsq_slope(lx, ly);
    double res = 0.0;
    {
      // Least-squares residual of the log-log fit, reported alongside.
      double mx = 0.0, my = 0.0;
      for (double v : lx) mx += v;
      for (double v : ly) my += v;
      mx /= static_cast<double>(lx.size());
      my /= static_cast<double>(ly.size());
      for (std::size_t i = 0; i < lx.size(); ++i) {
        const double pred = my + order * (lx[i] - mx);
        res += (ly[i] - pred) * (ly[i] - pred);
      }
    }
    rep.add_metric("fitted_order", axis.back(), order);
    rep.add_metric("fit_residual", axis.back(), res);
  }
  rep.wall_clock_ms = ms_since(t_start);
  gsde::save_report_json(rep, opt.out + "/report.json");
  return 0;
}

int cmd_list() {
  for (const std::string& name : gsde::scenario_names()) {
    const gsde::Scenario sc = gsde::make_scenario(name);
    std::printf("%-20s %s\n", name.c_str(), sc.description.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for jump-diffusion systems"};
  app.fallthrough(true);
  app.set_config("--config", "", "INI file with long-option keys; flags win");

  Options opt;
  app.add_option("--scenario", opt.scenario, "scenario name (see `list`)");
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--horizon", opt.horizon, "time horizon T");
  app.add_option("--steps", opt.steps, "uniform step count (h = T/steps)");
  app.add_option("--paths", opt.paths, "ensemble size");
  app.add_option("--grid", opt.grid, "cells (\"N\", \"NxM\") or lo:hi:cells[,lo:hi:cells]");
  app.add_option("--levels", opt.levels, "refinement levels (h values or cell counts)");
  app.add_option("--pipeline", opt.pipeline, "converge pipeline: invariant|kernel|wentzell");
  app.add_option("--tol", opt.tol, "residual tolerance");
  app.add_option("--perturb-drift", opt.perturb_drift, "add eps*x to the drift");
  app.add_option("--out", opt.out, "output directory");

  CLI::App* c_sim = app.add_subcommand("simulate", "integrate sample paths");
  CLI::App* c_jac = app.add_subcommand("jacobian", "propagate the sensitivity matrix");
  CLI::App* c_ker = app.add_subcommand("kernel", "evolve the transported density");
  CLI::App* c_wen = app.add_subcommand("wentzell", "field composition comparison");
  CLI::App* c_cer = app.add_subcommand("certify", "certify the first-integral candidate");
  CLI::App* c_con = app.add_subcommand("converge", "refinement study");
  CLI::App* c_lst = app.add_subcommand("list", "list scenarios");
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // --help stays 0, any usage error is 1
  }

  try {
    if (c_lst->parsed()) return cmd_list();
    std::filesystem::create_directories(opt.out);
    if (c_sim->parsed()) return cmd_simulate(opt);
    if (c_jac->parsed()) return cmd_jacobian(opt);
    if (c_ker->parsed()) return cmd_kernel(opt);
    if (c_wen->parsed()) return cmd_wentzell(opt);
    if (c_cer->parsed()) return cmd_certify(opt);
    if (c_con->parsed()) return cmd_converge(opt);
  } catch (const gsde::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
