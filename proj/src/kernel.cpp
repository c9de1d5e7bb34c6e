#include "gsde/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "gsde/simulate.hpp"

namespace gsde {

namespace {

// Per-node coefficient tables on a fixed grid at a fixed time. The direct
// solver uses a, b and B = b b^T; the logarithmic solver additionally needs
// div a, beta_k = d_i b_ik and the assembled affine coefficients.
struct CoeffTables {
  int dim = 0;
  int m = 0;
  std::vector<Eigen::ArrayXd> a;  // [d] -> per-node a_d
  std::vector<Eigen::ArrayXd> b;  // [d * m + k] -> per-node b_dk
  std::vector<Eigen::ArrayXd> B;  // [i * dim + j] -> per-node (b b^T)_ij

  // Logarithmic solver only.
  std::vector<Eigen::ArrayXd> beta;  // [k] -> per-node d_i b_ik
  Eigen::ArrayXd c0;                 // constant drift term
  std::vector<Eigen::ArrayXd> c;     // [j] -> effective advection of the log

  std::vector<double> max_abs_adv;  // per-direction sup |velocity|
  double max_diff_sum = 0.0;        // sup over nodes of sum_d B_dd / dx_d^2
};

CoeffTables eval_coeff_tables(const SdeSystem& sys, const GridSpec& g, double t,
                              bool for_log) {
  CoeffTables ct;
  ct.dim = g.dim();
  ct.m = sys.m;
  const long N = g.total_nodes();
  ct.a.assign(static_cast<std::size_t>(ct.dim), Eigen::ArrayXd(N));
  ct.b.assign(static_cast<std::size_t>(ct.dim) * ct.m, Eigen::ArrayXd(N));
  ct.B.assign(static_cast<std::size_t>(ct.dim) * ct.dim, Eigen::ArrayXd(N));
  ct.max_abs_adv.assign(static_cast<std::size_t>(ct.dim), 0.0);

  Eigen::ArrayXd div_a;
  if (for_log) {
    ct.beta.assign(static_cast<std::size_t>(ct.m), Eigen::ArrayXd(N));
    ct.c0 = Eigen::ArrayXd(N);
    ct.c.assign(static_cast<std::size_t>(ct.dim), Eigen::ArrayXd(N));
    div_a = Eigen::ArrayXd(N);
  }

  for (long f = 0; f < N; ++f) {
    const Vec x = g.node_coord(f);
    const Vec av = sys.a(t, x);
    const Mat bv = sys.b(t, x);
    const Mat Bv = bv * bv.transpose();
    for (int d = 0; d < ct.dim; ++d) {
      ct.a[static_cast<std::size_t>(d)][f] = av[d];
      for (int k = 0; k < ct.m; ++k)
        ct.b[static_cast<std::size_t>(d * ct.m + k)][f] = bv(d, k);
      for (int j = 0; j < ct.dim; ++j)
        ct.B[static_cast<std::size_t>(d * ct.dim + j)][f] = Bv(d, j);
    }
    double diff_sum = 0.0;
    for (int d = 0; d < ct.dim; ++d)
      diff_sum += Bv(d, d) / (g.spacing(d) * g.spacing(d));
    ct.max_diff_sum = std::max(ct.max_diff_sum, diff_sum);

    if (for_log) {
      const Mat Ja = sys.a.jacobian(t, x);
      const std::vector<Mat> db = sys.b.dx(t, x);
      div_a[f] = Ja.trace();
      double beta_sq = 0.0;
      for (int k = 0; k < ct.m; ++k) {
        double bk = 0.0;
        for (int i = 0; i < ct.dim; ++i) bk += db[static_cast<std::size_t>(i)](i, k);
        ct.beta[static_cast<std::size_t>(k)][f] = bk;
        beta_sq += bk * bk;
      }
      for (int j = 0; j < ct.dim; ++j) {
        // c_j = a_j - d_i B_ij + b_jk beta_k with
        // d_i B_ij = sum_{i,k} [ (d_i b_ik) b_jk + b_ik (d_i b_jk) ].
        double divB_j = 0.0;
        for (int i = 0; i < ct.dim; ++i)
          for (int k = 0; k < ct.m; ++k)
            divB_j += db[static_cast<std::size_t>(i)](i, k) * bv(j, k) +
                      bv(i, k) * db[static_cast<std::size_t>(i)](j, k);
        double b_beta_j = 0.0;
        for (int k = 0; k < ct.m; ++k)
          b_beta_j += bv(j, k) * ct.beta[static_cast<std::size_t>(k)][f];
        ct.c[static_cast<std::size_t>(j)][f] = av[j] - divB_j + b_beta_j;
      }
      ct.c0[f] = -div_a[f] - 0.5 * beta_sq;  // second-derivative term added below
    }
  }

  if (for_log) {
    // Finish c0 with 1/2 d_i d_j B_ij evaluated by the same grid stencils the
    // update uses (second central on the diagonal, 4-point cross otherwise).
    // Nodes next to the boundary reuse the stencil values at the boundary.
    std::vector<int> mi(static_cast<std::size_t>(ct.dim));
    for (long f = 0; f < N; ++f) {
      g.multi_index(f, mi);
      if (g.is_boundary(mi)) continue;
      double q = 0.0;
      for (int d = 0; d < ct.dim; ++d) {
        const Eigen::ArrayXd& Bdd = ct.B[static_cast<std::size_t>(d * ct.dim + d)];
        const long s = g.stride(d);
        const double dx = g.spacing(d);
        q += 0.5 * (Bdd[f + s] - 2.0 * Bdd[f] + Bdd[f - s]) / (dx * dx);
      }
      for (int i = 0; i < ct.dim; ++i)
        for (int j = i + 1; j < ct.dim; ++j) {
          const Eigen::ArrayXd& Bij = ct.B[static_cast<std::size_t>(i * ct.dim + j)];
          const long si = g.stride(i);
          const long sj = g.stride(j);
          q += (Bij[f + si + sj] - Bij[f + si - sj] - Bij[f - si + sj] +
                Bij[f - si - sj]) /
               (4.0 * g.spacing(i) * g.spacing(j));
        }
      ct.c0[f] += q;
    }
  }

  const std::vector<Eigen::ArrayXd>& vel = for_log ? ct.c : ct.a;
  for (int d = 0; d < ct.dim; ++d)
    ct.max_abs_adv[static_cast<std::size_t>(d)] =
        vel[static_cast<std::size_t>(d)].abs().maxCoeff();
  return ct;
}

void check_stability(const CoeffTables& ct, const GridSpec& g, double h,
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

std::vector<std::uint8_t> interior_mask(const GridSpec& g) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.total_nodes()), 0);
  std::vector<int> mi(static_cast<std::size_t>(g.dim()));
  for (long f = 0; f < g.total_nodes(); ++f) {
    g.multi_index(f, mi);
    mask[static_cast<std::size_t>(f)] = g.is_boundary(mi) ? 0 : 1;
  }
  return mask;
}

// One explicit step of the direct density equation on the interior.
void step_direct(const GridSpec& g, const CoeffTables& ct,
                 const std::vector<std::uint8_t>& interior, const Eigen::ArrayXd& rho,
                 Eigen::ArrayXd& out, double dt, const Vec& dw) {
  const int dim = ct.dim;
  const int m = ct.m;
  const long N = g.total_nodes();
  out = rho;  // boundary rows stay frozen
  for (long f = 0; f < N; ++f) {
    if (!interior[static_cast<std::size_t>(f)]) continue;

    double div_flux = 0.0;
    for (int d = 0; d < dim; ++d) {
      const Eigen::ArrayXd& ad = ct.a[static_cast<std::size_t>(d)];
      const long s = g.stride(d);
      const double vp = 0.5 * (ad[f] + ad[f + s]);
      const double fp = vp >= 0.0 ? vp * rho[f] : vp * rho[f + s];
      const double vm = 0.5 * (ad[f - s] + ad[f]);
      const double fm = vm >= 0.0 ? vm * rho[f - s] : vm * rho[f];
      div_flux += (fp - fm) / g.spacing(d);
    }

    double diff = 0.0;
    for (int d = 0; d < dim; ++d) {
      const Eigen::ArrayXd& Bdd = ct.B[static_cast<std::size_t>(d * dim + d)];
      const long s = g.stride(d);
      const double dx = g.spacing(d);
      diff += 0.5 *
              (rho[f + s] * Bdd[f + s] - 2.0 * rho[f] * Bdd[f] + rho[f - s] * Bdd[f - s]) /
              (dx * dx);
    }
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        const Eigen::ArrayXd& Bij = ct.B[static_cast<std::size_t>(i * dim + j)];
        const long si = g.stride(i);
        const long sj = g.stride(j);
        diff += (rho[f + si + sj] * Bij[f + si + sj] - rho[f + si - sj] * Bij[f + si - sj] -
                 rho[f - si + sj] * Bij[f - si + sj] +
                 rho[f - si - sj] * Bij[f - si - sj]) /
                (4.0 * g.spacing(i) * g.spacing(j));
      }

    double sto = 0.0;
    for (int k = 0; k < m; ++k) {
      double divk = 0.0;
      for (int d = 0; d < dim; ++d) {
        const Eigen::ArrayXd& bdk = ct.b[static_cast<std::size_t>(d * m + k)];
        const long s = g.stride(d);
        divk += (rho[f + s] * bdk[f + s] - rho[f - s] * bdk[f - s]) / (2.0 * g.spacing(d));
      }
      sto += divk * dw[k];
    }

    out[f] = rho[f] + dt * (diff - div_flux) - sto;
  }
}

// One explicit step of the logarithmic equation on the interior. The drift is
// affine in L: c0 - c_j d_j L (upwinded) + 1/2 B_ij d_i d_j L (central), and
// the Wiener load is -(beta_k + b_jk d_j L) dw_k with central first
// differences.
void step_log(const GridSpec& g, const CoeffTables& ct,
              const std::vector<std::uint8_t>& interior, const Eigen::ArrayXd& L,
              Eigen::ArrayXd& out, double dt, const Vec& dw) {
  const int dim = ct.dim;
  const int m = ct.m;
  const long N = g.total_nodes();
  out = L;
  for (long f = 0; f < N; ++f) {
    if (!interior[static_cast<std::size_t>(f)]) continue;

    double drift = ct.c0[f];
    double grad_c[4] = {0, 0, 0, 0};  // central d_j L, reused by the Wiener term
    for (int j = 0; j < dim; ++j) {
      const long s = g.stride(j);
      const double dx = g.spacing(j);
      const double cj = ct.c[static_cast<std::size_t>(j)][f];
      const double up =
          cj >= 0.0 ? (L[f] - L[f - s]) / dx : (L[f + s] - L[f]) / dx;
      drift -= cj * up;
      grad_c[j] = (L[f + s] - L[f - s]) / (2.0 * dx);
    }
    for (int d = 0; d < dim; ++d) {
      const Eigen::ArrayXd& Bdd = ct.B[static_cast<std::size_t>(d * dim + d)];
      const long s = g.stride(d);
      const double dx = g.spacing(d);
      drift += 0.5 * Bdd[f] * (L[f + s] - 2.0 * L[f] + L[f - s]) / (dx * dx);
    }
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        const Eigen::ArrayXd& Bij = ct.B[static_cast<std::size_t>(i * dim + j)];
        const long si = g.stride(i);
        const long sj = g.stride(j);
        drift += Bij[f] *
                 (L[f + si + sj] - L[f + si - sj] - L[f - si + sj] + L[f - si - sj]) /
                 (4.0 * g.spacing(i) * g.spacing(j));
      }

    double sto = 0.0;
    for (int k = 0; k < m; ++k) {
      double load = ct.beta[static_cast<std::size_t>(k)][f];
      for (int j = 0; j < dim; ++j)
        load += ct.b[static_cast<std::size_t>(j * m + k)][f] * grad_c[j];
      sto += load * dw[k];
    }

    out[f] = L[f] + dt * drift - sto;
  }
}

constexpr double kLogFloor = -745.0;  // below exp() underflow to zero

enum class Mode { Direct, Log };

KernelRunResult evolve_impl(const SdeSystem& sys, const GridDensity& rho0,
                            const NoiseRealization& noise, const KernelOptions& opts,
                            Mode mode) {
  const GridSpec& g = rho0.grid;
  if (g.dim() != sys.n)
    throw InvalidDiscretization("grid dimension does not match the state dimension");
  if (g.dim() > 4)
    throw InvalidDiscretization("density solver supports at most 4 dimensions");
  if (noise.wiener_dim != sys.m)
    throw InvalidDiscretization("noise Wiener dimension does not match the system");
  if (!rho0.values.allFinite())
    throw NumericalEvaluation("initial density contains non-finite values");

  Eigen::ArrayXd cur;
  if (mode == Mode::Log) {
    if ((rho0.values <= 0.0).any())
      throw PositivityLoss("logarithmic evolution requires strictly positive initial data");
    cur = rho0.values.log();
  } else {
    cur = rho0.values;
  }

  const std::vector<std::uint8_t> interior = interior_mask(g);
  const std::vector<Segment> segments = build_segments(noise);

  CoeffTables coeffs = eval_coeff_tables(sys, g, 0.0, mode == Mode::Log);
  check_stability(coeffs, g, noise.step, opts);

  Eigen::ArrayXd wts(g.total_nodes());
  {
    std::vector<int> mi(static_cast<std::size_t>(g.dim()));
    for (long f = 0; f < g.total_nodes(); ++f) {
      g.multi_index(f, mi);
      wts[f] = g.quad_weight(mi);
    }
  }

  KernelRunResult res;
  res.snapshots.push_back(GridDensity{g, cur, 0.0});
  auto record_mass = [&](double t, const Eigen::ArrayXd& v) {
    const double mass =
        mode == Mode::Log ? (wts * v.exp()).sum() : (wts * v).sum();
    res.mass_times.push_back(t);
    res.mass_series.push_back(mass);
    return mass;
  };
  const double initial_mass = record_mass(0.0, cur);
  res.min_value = cur.minCoeff();

  Eigen::ArrayXd next(cur.size());
  const double time_tol = 1e-12 * (noise.horizon + 1.0);
  int base_step = 0;  // completed uniform steps

  for (const Segment& seg : segments) {
    if (!sys.time_invariant) {
      coeffs = eval_coeff_tables(sys, g, seg.t0, mode == Mode::Log);
      check_stability(coeffs, g, noise.step, opts);
    }
    const double dt = seg.t1 - seg.t0;
    if (mode == Mode::Log)
      step_log(g, coeffs, interior, cur, next, dt, seg.dw);
    else
      step_direct(g, coeffs, interior, cur, next, dt, seg.dw);

    if (!next.allFinite())
      throw BlowUp("density solver produced non-finite values", seg.t0);

    for (const JumpEvent& ev : seg.jumps) {
      cur.swap(next);
      // Replacement: value(x) <- value(y(x)) adjusted by the inverse-map
      // determinant; nodes whose pre-jump point leaves the grid get the
      // vacuum value.
      for (long f = 0; f < g.total_nodes(); ++f) {
        if (!interior[static_cast<std::size_t>(f)]) {
          next[f] = cur[f];
          continue;
        }
        const Vec x = g.node_coord(f);
        const Vec y = inverse_jump_map(sys, ev.time, x, ev.mark);
        if (!g.contains(y)) {
          next[f] = mode == Mode::Log ? kLogFloor : 0.0;
          continue;
        }
        const double det = jump_jacobian_det(sys, ev.time, x, ev.mark);
        const double pulled = interp_linear(g, cur, y, ev.time);
        next[f] = mode == Mode::Log ? pulled + std::log(std::abs(det))
                                    : pulled * std::abs(det);
      }
    }

    cur.swap(next);
    res.min_value = std::min(res.min_value, cur.minCoeff());
    const double mass = record_mass(seg.t1, cur);
    if (std::abs(mass - initial_mass) >
        opts.mass_fail * std::max(std::abs(initial_mass), 1e-300))
      res.mass_loss = true;

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

}  // namespace

KernelRunResult evolve_kernel(const SdeSystem& sys, const GridDensity& rho0,
                              const NoiseRealization& noise, const KernelOptions& opts) {
  return evolve_impl(sys, rho0, noise, opts, Mode::Direct);
}

double check_normalization(const GridDensity& d) { return grid_mass(d); }

KernelRunResult evolve_log_kernel(const SdeSystem& sys, const GridDensity& rho0,
                                  const NoiseRealization& noise,
                                  const KernelOptions& opts) {
  return evolve_impl(sys, rho0, noise, opts, Mode::Log);
}

KernelCollection evolve_kernel_collection(const SdeSystem& sys,
                                          const std::vector<GridDensity>& rho0s,
                                          const NoiseRealization& noise,
                                          const KernelOptions& opts) {
  if (rho0s.empty()) throw InvalidDiscretization("kernel collection needs at least one density");
  const GridSpec& g = rho0s.front().grid;
  for (const GridDensity& d : rho0s)
    if (!d.grid.same_as(g))
      throw InvalidDiscretization("kernel collection densities must share one grid");

  const int K = static_cast<int>(rho0s.size());
  Mat gram(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = i; j < K; ++j) {
      gram(i, j) = grid_inner(g, rho0s[static_cast<std::size_t>(i)].values,
                              rho0s[static_cast<std::size_t>(j)].values);
      gram(j, i) = gram(i, j);
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo / hi < 1e-10) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "initial kernel family is numerically dependent (Gram ratio %.3g)",
                  hi > 0.0 ? lo / hi : 0.0);
    throw IllConditionedEstimate(buf);
  }

  KernelCollection out;
  out.kernels.reserve(rho0s.size());
  for (const GridDensity& d : rho0s) out.kernels.push_back(evolve_kernel(sys, d, noise, opts));
  return out;
}

double RatioField::eval(std::size_t ti, const Vec& x) const {
  if (ti >= times_.size()) throw InvalidDiscretization("ratio field snapshot index out of range");
  if (!grid_.contains(x))
    throw DomainEscape("ratio field evaluated outside its grid", times_[ti]);
  const int dim = grid_.dim();
  std::vector<int> base(static_cast<std::size_t>(dim));
  std::vector<double> frac(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    const double u = (x[d] - grid_.lo(d)) / grid_.spacing(d);
    int i = static_cast<int>(std::floor(u));
    i = std::max(0, std::min(i, grid_.cells(d) - 1));
    base[static_cast<std::size_t>(d)] = i;
    frac[static_cast<std::size_t>(d)] = u - i;
  }
  const Eigen::ArrayXd& vals = values_[ti];
  const std::vector<std::uint8_t>& ok = defined_[ti];
  double acc = 0.0;
  std::vector<int> mi(static_cast<std::size_t>(dim));
  for (int corner = 0; corner < (1 << dim); ++corner) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      const bool high = (corner >> d) & 1;
      mi[static_cast<std::size_t>(d)] = base[static_cast<std::size_t>(d)] + (high ? 1 : 0);
      w *= high ? frac[static_cast<std::size_t>(d)] : 1.0 - frac[static_cast<std::size_t>(d)];
    }
    const long f = grid_.flat_index(mi);
    if (!ok[static_cast<std::size_t>(f)])
      throw RatioUndefined("ratio stencil touches a node with vanishing denominator");
    acc += w * vals[f];
  }
  return acc;
}

std::vector<RatioField> build_first_integrals(const KernelCollection& collection,
                                              double ratio_floor) {
  if (collection.kernels.size() < 2)
    throw InvalidDiscretization("ratio construction needs at least two kernels");
  const KernelRunResult& ref = collection.kernels.back();
  const std::size_t S = ref.snapshots.size();
  for (const KernelRunResult& k : collection.kernels)
    if (k.snapshots.size() != S)
      throw InvalidDiscretization("kernel runs have mismatched snapshot counts");

  std::vector<double> times;
  times.reserve(S);
  for (const GridDensity& d : ref.snapshots) times.push_back(d.time);

  std::vector<RatioField> out;
  out.reserve(collection.kernels.size() - 1);
  for (std::size_t l = 0; l + 1 < collection.kernels.size(); ++l) {
    const KernelRunResult& num = collection.kernels[l];
    std::vector<Eigen::ArrayXd> values(S);
    std::vector<std::vector<std::uint8_t>> defined(S);
    for (std::size_t s = 0; s < S; ++s) {
      const Eigen::ArrayXd& nv = num.snapshots[s].values;
      const Eigen::ArrayXd& dv = ref.snapshots[s].values;
      Eigen::ArrayXd r = Eigen::ArrayXd::Zero(nv.size());
      std::vector<std::uint8_t> ok(static_cast<std::size_t>(nv.size()), 0);
      for (long f = 0; f < nv.size(); ++f) {
        if (std::abs(dv[f]) > ratio_floor) {
          r[f] = nv[f] / dv[f];
          ok[static_cast<std::size_t>(f)] = 1;
        }
      }
      values[s] = std::move(r);
      defined[s] = std::move(ok);
    }
    out.emplace_back(ref.snapshots.front().grid, times, std::move(values), std::move(defined));
  }
  return out;
}

}  // namespace gsde
