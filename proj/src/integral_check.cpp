#include "gsde/integral_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gsde/rng.hpp"
#include "gsde/simulate.hpp"

namespace gsde {

namespace {

void track(ConditionStats& st, double value, double t, const Vec& x, const Vec* mark) {
  if (value > st.max) {
    st.max = value;
    st.argmax_time = t;
    st.argmax_point = x;
    if (mark) st.argmax_mark = *mark;
  }
  st.mean += value;  // finalized to an average by the caller
}

double lsq_slope(const std::vector<double>& lx, const std::vector<double>& ly) {
  const std::size_t n = lx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

ConditionReport check_conditions(const SdeSystem& sys, const ScalarField& u,
                                 const GridSpec& check_grid, const std::vector<double>& times,
                                 double tol, const CheckOptions& opts) {
  if (check_grid.dim() != sys.n)
    throw InvalidDiscretization("check grid dimension does not match the system");
  if (times.empty()) throw InvalidDiscretization("condition check needs at least one time");
  if (u.dim() != sys.n)
    throw InvalidDiscretization("candidate dimension does not match the system");

  const bool has_jumps = sys.measure.intensity > 0.0;
  std::vector<Vec> marks;
  if (has_jumps) {
    if (opts.use_mark_grid && !sys.measure.mark_grid.empty()) {
      marks = sys.measure.mark_grid;
    } else {
      std::mt19937_64 gen = rng::make_stream(opts.seed, 0);
      for (int i = 0; i < opts.random_marks; ++i) marks.push_back(sys.measure.sampler(gen));
    }
  }

  ConditionReport rep;
  rep.tolerance = tol;
  long jump_evals = 0;

  for (double t : times) {
    for (long f = 0; f < check_grid.total_nodes(); ++f) {
      const Vec x = check_grid.node_coord(f);
      ++rep.nodes_evaluated;
      try {
        const Vec grad = u.gradient(t, x);
        const double ut = u.time_derivative(t, x);
        const Mat bv = sys.b(t, x);
        const Vec av = sys.a(t, x);
        const std::vector<Mat> db = sys.b.dx(t, x);

        double c1 = 0.0;
        for (int k = 0; k < sys.m; ++k) c1 = std::max(c1, std::abs(bv.col(k).dot(grad)));

        double c2 = ut;
        for (int i = 0; i < sys.n; ++i) {
          double bracket = av[i];
          for (int j = 0; j < sys.n; ++j)
            for (int k = 0; k < sys.m; ++k)
              bracket -= 0.5 * bv(j, k) * db[static_cast<std::size_t>(j)](i, k);
          c2 += grad[i] * bracket;
        }

        std::vector<double> c3(marks.size());
        if (has_jumps) {
          const double ux = u(t, x);
          for (std::size_t q = 0; q < marks.size(); ++q)
            c3[q] = std::abs(ux - u(t, x + sys.g(t, x, marks[q])));
        }

        track(rep.wiener, c1, t, x, nullptr);
        track(rep.drift, std::abs(c2), t, x, nullptr);
        for (std::size_t q = 0; q < marks.size(); ++q) {
          track(rep.jump, c3[q], t, x, &marks[q]);
          ++jump_evals;
        }
      } catch (const Error&) {
        ++rep.nodes_failed;
      }
    }
  }

  const long ok = rep.nodes_evaluated - rep.nodes_failed;
  if (rep.nodes_failed * 10 > rep.nodes_evaluated) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "condition check failed on %ld of %ld evaluation nodes",
                  rep.nodes_failed, rep.nodes_evaluated);
    throw NumericalEvaluation(buf);
  }
  if (ok > 0) {
    rep.wiener.mean /= static_cast<double>(ok);
    rep.drift.mean /= static_cast<double>(ok);
  }
  if (jump_evals > 0) rep.jump.mean /= static_cast<double>(jump_evals);

  rep.wiener.pass = rep.wiener.max <= tol;
  rep.drift.pass = rep.drift.max <= tol;
  rep.jump.pass = rep.jump.max <= tol;
  rep.overall_pass = rep.wiener.pass && rep.drift.pass && rep.jump.pass;
  return rep;
}

ConstancyStats monte_carlo_constancy(const SdeSystem& sys, const ScalarField& u,
                                     const std::vector<Vec>& x0s, std::uint64_t master_seed,
                                     int n_paths, double T,
                                     const std::vector<double>& h_levels) {
  if (x0s.empty()) throw InvalidDiscretization("constancy study needs initial points");
  if (n_paths <= 0) throw InvalidDiscretization("constancy study needs paths");
  if (h_levels.empty()) throw InvalidDiscretization("constancy study needs step sizes");
  for (std::size_t l = 1; l < h_levels.size(); ++l)
    if (!(h_levels[l] < h_levels[l - 1]))
      throw InvalidDiscretization("step sizes must be strictly decreasing");

  const double h_fine = h_levels.back();
  ConstancyStats out;
  out.levels.resize(h_levels.size());
  for (std::size_t l = 0; l < h_levels.size(); ++l) out.levels[l].h = h_levels[l];

  std::vector<std::vector<double>> sups(h_levels.size());
  double global_max = 0.0;

  for (int p = 0; p < n_paths; ++p) {
    const Vec& x0 = x0s[static_cast<std::size_t>(p) % x0s.size()];
    const double u0 = u(0.0, x0);
    const double scale = std::abs(u0) > 1e-8 ? std::abs(u0) : 1.0;
    const NoiseRealization fine =
        generate_noise(SeedSpec{master_seed, static_cast<std::uint64_t>(p)}, T, h_fine,
                       sys.m, sys.measure);
    for (std::size_t l = 0; l < h_levels.size(); ++l) {
      const NoiseRealization noise =
          l + 1 == h_levels.size() ? fine : refine_noise(h_levels[l], fine);
      try {
        const Path path = integrate_path(sys, x0, noise);
        double sup = 0.0;
        for (std::size_t i = 0; i < path.times.size(); ++i)
          sup = std::max(sup, std::abs(u(path.times[i], path.state_at(i)) - u0));
        sups[l].push_back(sup / scale);
        global_max = std::max(global_max, sup / scale);
      } catch (const BlowUp&) {
        ++out.levels[l].blowups;
      }
    }
  }

  std::vector<double> lx, ly;
  for (std::size_t l = 0; l < h_levels.size(); ++l) {
    std::vector<double>& s = sups[l];
    ConstancyLevel& lev = out.levels[l];
    if (s.empty()) continue;
    std::sort(s.begin(), s.end());
    double sum = 0.0;
    for (double v : s) sum += v;
    lev.mean_sup = sum / static_cast<double>(s.size());
    lev.median_sup = s[s.size() / 2];
    lev.max_sup = s.back();
    if (lev.mean_sup > 0.0) {
      lx.push_back(std::log(lev.h));
      ly.push_back(std::log(lev.mean_sup));
    }
  }

  out.exact = global_max < 1e-14;
  out.fitted_order = lx.size() >= 2 ? lsq_slope(lx, ly) : 0.0;
  out.plateau = !out.exact && out.fitted_order < 0.15;
  return out;
}

namespace {

// Per-node coefficients of the candidate-field equation: the state drift a,
// the diffusion b and B = b b^T, and the first-derivative load
// M_j = sum_ik b_ik db_jk/dx_i that multiplies du/dx_j with a plus sign.
struct UCoeffs {
  int dim = 0;
  int m = 0;
  std::vector<Eigen::ArrayXd> a;
  std::vector<Eigen::ArrayXd> b;  // [d * m + k]
  std::vector<Eigen::ArrayXd> B;  // [i * dim + j]
  std::vector<Eigen::ArrayXd> M;  // [j]
  std::vector<double> max_abs_adv;
  double max_diff_sum = 0.0;
};

UCoeffs eval_u_coeffs(const SdeSystem& sys, const GridSpec& g, double t) {
  UCoeffs ct;
  ct.dim = g.dim();
  ct.m = sys.m;
  const long N = g.total_nodes();
  ct.a.assign(static_cast<std::size_t>(ct.dim), Eigen::ArrayXd(N));
  ct.b.assign(static_cast<std::size_t>(ct.dim) * ct.m, Eigen::ArrayXd(N));
  ct.B.assign(static_cast<std::size_t>(ct.dim) * ct.dim, Eigen::ArrayXd(N));
  ct.M.assign(static_cast<std::size_t>(ct.dim), Eigen::ArrayXd(N));
  ct.max_abs_adv.assign(static_cast<std::size_t>(ct.dim), 0.0);
  for (long f = 0; f < N; ++f) {
    const Vec x = g.node_coord(f);
    const Vec av = sys.a(t, x);
    const Mat bv = sys.b(t, x);
    const Mat Bv = bv * bv.transpose();
    const std::vector<Mat> db = sys.b.dx(t, x);
    for (int d = 0; d < ct.dim; ++d) {
      ct.a[static_cast<std::size_t>(d)][f] = av[d];
      for (int k = 0; k < ct.m; ++k)
        ct.b[static_cast<std::size_t>(d * ct.m + k)][f] = bv(d, k);
      for (int j = 0; j < ct.dim; ++j)
        ct.B[static_cast<std::size_t>(d * ct.dim + j)][f] = Bv(d, j);
    }
    for (int j = 0; j < ct.dim; ++j) {
      double mj = 0.0;
      for (int i = 0; i < ct.dim; ++i)
        for (int k = 0; k < ct.m; ++k)
          mj += bv(i, k) * db[static_cast<std::size_t>(i)](j, k);
      ct.M[static_cast<std::size_t>(j)][f] = mj;
    }
    double diff_sum = 0.0;
    for (int d = 0; d < ct.dim; ++d)
      diff_sum += Bv(d, d) / (g.spacing(d) * g.spacing(d));
    ct.max_diff_sum = std::max(ct.max_diff_sum, diff_sum);
  }
  for (int d = 0; d < ct.dim; ++d)
    ct.max_abs_adv[static_cast<std::size_t>(d)] =
        (ct.a[static_cast<std::size_t>(d)].abs() + ct.M[static_cast<std::size_t>(d)].abs())
            .maxCoeff();
  return ct;
}

void check_u_stability(const UCoeffs& ct, const GridSpec& g, double h,
                       const KernelOptions& opts) {
  const double mu = h * ct.max_diff_sum;
  if (mu > opts.c_cfl) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "diffusive stability violated: h * max sum_d B_dd/dx_d^2 = %.6g "
                  "exceeds %.6g",
                  mu, opts.c_cfl);
    throw UnstableDiscretization(buf);
  }
  double adv = 0.0;
  for (int d = 0; d < g.dim(); ++d)
    adv += ct.max_abs_adv[static_cast<std::size_t>(d)] / g.spacing(d);
  if (h * adv > opts.c_advect) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "advective stability violated: h * sum_d max|v_d|/dx_d = %.6g "
                  "exceeds %.6g",
                  h * adv, opts.c_advect);
    throw UnstableDiscretization(buf);
  }
}

void step_u(const GridSpec& g, const UCoeffs& ct, const std::vector<std::uint8_t>& interior,
            const Eigen::ArrayXd& u, Eigen::ArrayXd& out, double dt, const Vec& dw) {
  const int dim = ct.dim;
  const int m = ct.m;
  const long N = g.total_nodes();
  out = u;
  for (long f = 0; f < N; ++f) {
    if (!interior[static_cast<std::size_t>(f)]) continue;

    double drift = 0.0;
    double grad_c[4] = {0, 0, 0, 0};
    for (int j = 0; j < dim; ++j) {
      const long s = g.stride(j);
      const double dx = g.spacing(j);
      const double aj = ct.a[static_cast<std::size_t>(j)][f];
      const double up = aj >= 0.0 ? (u[f] - u[f - s]) / dx : (u[f + s] - u[f]) / dx;
      grad_c[j] = (u[f + s] - u[f - s]) / (2.0 * dx);
      drift += -aj * up + ct.M[static_cast<std::size_t>(j)][f] * grad_c[j];
    }
    for (int d = 0; d < dim; ++d) {
      const Eigen::ArrayXd& Bdd = ct.B[static_cast<std::size_t>(d * dim + d)];
      const long s = g.stride(d);
      const double dx = g.spacing(d);
      drift += 0.5 * Bdd[f] * (u[f + s] - 2.0 * u[f] + u[f - s]) / (dx * dx);
    }
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        const Eigen::ArrayXd& Bij = ct.B[static_cast<std::size_t>(i * dim + j)];
        const long si = g.stride(i);
        const long sj = g.stride(j);
        drift += Bij[f] *
                 (u[f + si + sj] - u[f + si - sj] - u[f - si + sj] + u[f - si - sj]) /
                 (4.0 * g.spacing(i) * g.spacing(j));
      }

    double sto = 0.0;
    for (int k = 0; k < m; ++k) {
      double load = 0.0;
      for (int j = 0; j < dim; ++j)
        load += ct.b[static_cast<std::size_t>(j * m + k)][f] * grad_c[j];
      sto += load * dw[k];
    }

    out[f] = u[f] + dt * drift - sto;
  }
}

}  // namespace

KernelRunResult evolve_u_spde(const SdeSystem& sys, const GridDensity& u0,
                              const NoiseRealization& noise, const KernelOptions& opts) {
  const GridSpec& g = u0.grid;
  if (g.dim() != sys.n)
    throw InvalidDiscretization("grid dimension does not match the state dimension");
  if (g.dim() > 4)
    throw InvalidDiscretization("candidate-field solver supports at most 4 dimensions");
  if (noise.wiener_dim != sys.m)
    throw InvalidDiscretization("noise Wiener dimension does not match the system");
  if (!u0.values.allFinite())
    throw NumericalEvaluation("initial candidate field contains non-finite values");

  Eigen::ArrayXd cur = u0.values;
  std::vector<std::uint8_t> interior(static_cast<std::size_t>(g.total_nodes()), 0);
  {
    std::vector<int> mi(static_cast<std::size_t>(g.dim()));
    for (long f = 0; f < g.total_nodes(); ++f) {
      g.multi_index(f, mi);
      interior[static_cast<std::size_t>(f)] = g.is_boundary(mi) ? 0 : 1;
    }
  }

  const std::vector<Segment> segments = build_segments(noise);
  UCoeffs coeffs = eval_u_coeffs(sys, g, 0.0);
  check_u_stability(coeffs, g, noise.step, opts);

  KernelRunResult res;
  res.snapshots.push_back(GridDensity{g, cur, 0.0});
  res.min_value = cur.minCoeff();

  Eigen::ArrayXd next(cur.size());
  const double time_tol = 1e-12 * (noise.horizon + 1.0);
  int base_step = 0;

  for (const Segment& seg : segments) {
    if (!sys.time_invariant) {
      coeffs = eval_u_coeffs(sys, g, seg.t0);
      check_u_stability(coeffs, g, noise.step, opts);
    }
    step_u(g, coeffs, interior, cur, next, seg.t1 - seg.t0, seg.dw);
    if (!next.allFinite())
      throw BlowUp("candidate-field solver produced non-finite values", seg.t0);

    for (const JumpEvent& ev : seg.jumps) {
      cur.swap(next);
      for (long f = 0; f < g.total_nodes(); ++f) {
        if (!interior[static_cast<std::size_t>(f)]) {
          next[f] = cur[f];
          continue;
        }
        const Vec x = g.node_coord(f);
        const Vec y = inverse_jump_map(sys, ev.time, x, ev.mark);
        next[f] = g.contains(y) ? interp_linear(g, cur, y, ev.time) : cur[f];
      }
    }

    cur.swap(next);
    res.min_value = std::min(res.min_value, cur.minCoeff());
    if (opts.observer) {
      GridDensity view{g, cur, seg.t1};
      opts.observer(seg.t1, view);
    }
    if (std::abs(seg.t1 - noise.time_at(base_step + 1)) < time_tol) {
      ++base_step;
      if (opts.snapshot_stride > 0 && base_step % opts.snapshot_stride == 0 &&
          base_step < noise.steps)
        res.snapshots.push_back(GridDensity{g, cur, seg.t1});
    }
  }

  res.snapshots.push_back(GridDensity{g, cur, noise.horizon});
  return res;
}

}  // namespace gsde
