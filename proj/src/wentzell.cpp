#include "gsde/wentzell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "gsde/rng.hpp"

namespace gsde {

namespace {

// Nodal coefficient slabs for a time-invariant field system: Pi as
// total_nodes x n0 and one total_nodes x n0 slab per Wiener component.
struct FieldCoeffs {
  Mat pi;
  std::vector<Mat> d;
};

FieldCoeffs eval_field_coeffs(const FieldSystem& fs, const GridSpec& g, double t) {
  FieldCoeffs fc;
  const long N = g.total_nodes();
  const int m = fs.D.cols();
  fc.pi.resize(N, fs.n0);
  fc.d.assign(static_cast<std::size_t>(m), Mat(N, fs.n0));
  for (long f = 0; f < N; ++f) {
    const Vec x = g.node_coord(f);
    fc.pi.row(f) = fs.Pi(t, x).transpose();
    const Mat Dv = fs.D(t, x);
    for (int k = 0; k < m; ++k)
      fc.d[static_cast<std::size_t>(k)].row(f) = Dv.col(k).transpose();
  }
  return fc;
}

void apply_field_jump(const FieldSystem& fs, const GridSpec& g, Mat& values,
                      const JumpEvent& ev) {
  for (long f = 0; f < g.total_nodes(); ++f)
    values.row(f) += fs.G(ev.time, g.node_coord(f), ev.mark).transpose();
}

}  // namespace

FieldSystem make_field_system(int n0, int n, int m, VectorField Pi, MatrixField D,
                              JumpField G, bool time_invariant) {
  if (n0 <= 0) throw InvalidDiscretization("field system needs a positive component count");
  if (Pi.dim_in() != n || Pi.dim_out() != n0)
    throw InvalidDiscretization("field drift shape does not match (n, n0)");
  if (D.dim_in() != n || D.rows() != n0 || D.cols() != m)
    throw InvalidDiscretization("field Wiener loading shape does not match (n, n0, m)");
  if (G.dim_in() != n || G.dim_out() != n0)
    throw InvalidDiscretization("field jump response shape does not match (n, n0)");
  FieldSystem fs;
  fs.n0 = n0;
  fs.Pi = std::move(Pi);
  fs.D = std::move(D);
  fs.G = std::move(G);
  fs.time_invariant = time_invariant;
  return fs;
}

RandomFieldState make_field_state(const GridSpec& grid, int n0,
                                  const std::function<Vec(const Vec&)>& z0) {
  RandomFieldState st;
  st.grid = grid;
  st.values.resize(grid.total_nodes(), n0);
  for (long f = 0; f < grid.total_nodes(); ++f) {
    const Vec v = z0(grid.node_coord(f));
    if (v.size() != n0)
      throw InvalidDiscretization("initial field returned a wrong component count");
    if (!v.allFinite())
      throw NumericalEvaluation("initial field contains non-finite values");
    st.values.row(f) = v.transpose();
  }
  st.time = 0.0;
  return st;
}

FieldRunResult evolve_field(const FieldSystem& fs, const RandomFieldState& z0,
                            const NoiseRealization& noise, const FieldRunOptions& opts) {
  const GridSpec& g = z0.grid;
  if (z0.values.rows() != g.total_nodes() || z0.values.cols() != fs.n0)
    throw InvalidDiscretization("field state shape does not match its grid");
  if (fs.D.cols() != noise.wiener_dim)
    throw InvalidDiscretization("field Wiener loading does not match the noise dimension");

  Mat values = z0.values;
  const std::vector<Segment> segments = build_segments(noise);
  FieldCoeffs coeffs = eval_field_coeffs(fs, g, 0.0);

  FieldRunResult res;
  res.snapshots.push_back(RandomFieldState{g, values, 0.0});

  const double time_tol = 1e-12 * (noise.horizon + 1.0);
  int base_step = 0;
  for (const Segment& seg : segments) {
    if (!fs.time_invariant) coeffs = eval_field_coeffs(fs, g, seg.t0);
    const double dt = seg.t1 - seg.t0;
    values += dt * coeffs.pi;
    for (int k = 0; k < noise.wiener_dim; ++k)
      values += seg.dw[k] * coeffs.d[static_cast<std::size_t>(k)];
    for (const JumpEvent& ev : seg.jumps) apply_field_jump(fs, g, values, ev);
    if (!values.allFinite())
      throw BlowUp("field values left the representable range", seg.t0);

    if (opts.observer) {
      RandomFieldState view{g, values, seg.t1};
      opts.observer(seg.t1, view);
    }
    if (std::abs(seg.t1 - noise.time_at(base_step + 1)) < time_tol) {
      ++base_step;
      if (opts.snapshot_stride > 0 && base_step % opts.snapshot_stride == 0 &&
          base_step < noise.steps)
        res.snapshots.push_back(RandomFieldState{g, values, seg.t1});
    }
  }
  res.snapshots.push_back(RandomFieldState{g, values, noise.horizon});
  return res;
}

Vec compose_direct(const RandomFieldState& field, const Vec& x) {
  const int n0 = static_cast<int>(field.values.cols());
  Vec out(n0);
  for (int c = 0; c < n0; ++c)
    out[c] = interp_cubic(field.grid, field.values.col(c).array(), x, field.time);
  return out;
}

Mat compose_direct(const FieldRunResult& series, const Path& path) {
  const std::size_t T = path.times.size();
  if (series.snapshots.size() != T)
    throw InvalidDiscretization("field series and path have mismatched lengths");
  const int n0 = static_cast<int>(series.snapshots.front().values.cols());
  Mat out(static_cast<Eigen::Index>(T), n0);
  for (std::size_t i = 0; i < T; ++i) {
    const RandomFieldState& st = series.snapshots[i];
    if (std::abs(st.time - path.times[i]) > 1e-9 * (path.times.back() + 1.0))
      throw InvalidDiscretization("field snapshot times do not match the path");
    out.row(static_cast<Eigen::Index>(i)) = compose_direct(st, path.state_at(i)).transpose();
  }
  return out;
}

WentzellComparison run_wentzell_comparison(const SdeSystem& sys, const FieldSystem& fs,
                                           const GridSpec& grid,
                                           const std::function<Vec(const Vec&)>& z0,
                                           const Vec& x0, const NoiseRealization& noise) {
  if (grid.dim() != sys.n)
    throw InvalidDiscretization("field grid dimension does not match the state dimension");
  if (fs.D.cols() != sys.m)
    throw InvalidDiscretization("field Wiener loading does not match the system");

  const std::vector<Segment> segments = build_segments(noise);
  Path path = integrate_path(sys, x0, noise);

  Mat values = make_field_state(grid, fs.n0, z0).values;
  FieldCoeffs coeffs = eval_field_coeffs(fs, grid, 0.0);

  const std::size_t rows = segments.size() + 1;
  WentzellComparison cmp;
  cmp.times.reserve(rows);
  cmp.formula.resize(static_cast<Eigen::Index>(rows), fs.n0);
  cmp.direct.resize(static_cast<Eigen::Index>(rows), fs.n0);

  // Both series start from the interpolated nodal field so that their gap
  // measures evolution error, not sampling error at t = 0.
  Vec zeta(fs.n0);
  for (int c = 0; c < fs.n0; ++c)
    zeta[c] = interp_cubic(grid, values.col(c).array(), x0, 0.0);
  cmp.times.push_back(0.0);
  cmp.formula.row(0) = zeta.transpose();
  cmp.direct.row(0) = zeta.transpose();

  std::size_t jump_cursor = 0;
  double value_c;
  Vec grad_c(sys.n);
  Mat hess_c(sys.n, sys.n);

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const double dt = seg.t1 - seg.t0;
    const Vec x_pre = path.state_at(i);

    // Increment of the composition from the field state at the segment start.
    const Vec a_v = sys.a(seg.t0, x_pre);
    const Mat b_v = sys.b(seg.t0, x_pre);
    const Mat B_v = b_v * b_v.transpose();
    const Vec pi_v = fs.Pi(seg.t0, x_pre);
    const Mat D_v = fs.D(seg.t0, x_pre);
    const std::vector<Mat> dD = fs.D.dx(seg.t0, x_pre);
    for (int c = 0; c < fs.n0; ++c) {
      interp_cubic_derivs(grid, values.col(c).array(), x_pre, value_c, grad_c, hess_c,
                          seg.t0);
      double drift = pi_v[c] + a_v.dot(grad_c) + 0.5 * B_v.cwiseProduct(hess_c).sum();
      for (int i2 = 0; i2 < sys.n; ++i2)
        for (int k = 0; k < sys.m; ++k)
          drift += b_v(i2, k) * dD[static_cast<std::size_t>(i2)](c, k);
      double wiener = 0.0;
      for (int k = 0; k < sys.m; ++k)
        wiener += (D_v(c, k) + b_v.col(k).dot(grad_c)) * seg.dw[k];
      zeta[c] += drift * dt + wiener;
    }

    // Field moves through the same interval.
    if (!fs.time_invariant) coeffs = eval_field_coeffs(fs, grid, seg.t0);
    values += dt * coeffs.pi;
    for (int k = 0; k < sys.m; ++k)
      values += seg.dw[k] * coeffs.d[static_cast<std::size_t>(k)];

    // Jump contributions read the pre-jump field, then the field jumps.
    for (const JumpEvent& ev : seg.jumps) {
      if (jump_cursor >= path.jump_records.size())
        throw InvalidDiscretization("path jump records do not cover the realization");
      const JumpRecord& rec = path.jump_records[jump_cursor++];
      const Vec x_minus = rec.pre_state;
      const Vec x_plus = x_minus + sys.g(ev.time, x_minus, ev.mark);
      const Vec G_v = fs.G(ev.time, x_plus, ev.mark);
      for (int c = 0; c < fs.n0; ++c) {
        const double z_plus = interp_cubic(grid, values.col(c).array(), x_plus, ev.time);
        const double z_minus = interp_cubic(grid, values.col(c).array(), x_minus, ev.time);
        zeta[c] += G_v[c] + z_plus - z_minus;
      }
      apply_field_jump(fs, grid, values, ev);
    }

    if (!values.allFinite())
      throw BlowUp("field values left the representable range", seg.t0);
    if (!zeta.allFinite())
      throw BlowUp("composition series left the representable range", seg.t0);

    const Vec x_post = path.state_at(i + 1);
    cmp.times.push_back(seg.t1);
    cmp.formula.row(static_cast<Eigen::Index>(i + 1)) = zeta.transpose();
    for (int c = 0; c < fs.n0; ++c)
      cmp.direct(static_cast<Eigen::Index>(i + 1), c) =
          interp_cubic(grid, values.col(c).array(), x_post, seg.t1);
  }

  cmp.max_gap = (cmp.formula - cmp.direct).cwiseAbs().maxCoeff();
  cmp.path = std::move(path);
  return cmp;
}

WentzellSeries integrate_wentzell(const SdeSystem& sys, const FieldSystem& fs,
                                  const GridSpec& grid,
                                  const std::function<Vec(const Vec&)>& z0, const Vec& x0,
                                  const NoiseRealization& noise) {
  WentzellComparison cmp = run_wentzell_comparison(sys, fs, grid, z0, x0, noise);
  WentzellSeries s;
  s.times = std::move(cmp.times);
  s.values = std::move(cmp.formula);
  return s;
}

Proposition1Result check_proposition1(const SdeSystem& sys, const FieldRunResult& field,
                                      const KernelRunResult& kernel,
                                      const NoiseRealization& noise,
                                      const Proposition1Options& opts) {
  if (field.snapshots.empty() || kernel.snapshots.empty())
    throw InvalidDiscretization("empty series passed to the pairing check");
  if (field.snapshots.front().values.cols() != 1)
    throw InvalidDiscretization("pairing check requires a scalar field");
  const GridSpec& g = kernel.snapshots.front().grid;
  if (!field.snapshots.front().grid.same_as(g))
    throw InvalidDiscretization("field and kernel series must share one grid");

  // Match snapshot times between the two series.
  const double tol = 1e-9 * (noise.horizon + 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0, j = 0; i < field.snapshots.size() && j < kernel.snapshots.size();) {
    const double ft = field.snapshots[i].time;
    const double kt = kernel.snapshots[j].time;
    if (std::abs(ft - kt) <= tol) {
      pairs.emplace_back(i, j);
      ++i;
      ++j;
    } else if (ft < kt) {
      ++i;
    } else {
      ++j;
    }
  }
  if (pairs.size() < 2)
    throw InvalidDiscretization("field and kernel series share fewer than two times");

  // Proposal points, importance weights and shared-noise trajectories.
  std::mt19937_64 gen = rng::make_stream(opts.sample_seed, 0);
  const Eigen::ArrayXd& rho0 = kernel.snapshots.front().values;
  double volume = 1.0;
  for (int d = 0; d < g.dim(); ++d) volume *= g.hi(d) - g.lo(d);

  std::vector<Vec> y0(static_cast<std::size_t>(opts.n_samples));
  std::vector<double> w(static_cast<std::size_t>(opts.n_samples));
  double wsum = 0.0, wsq = 0.0;
  for (int s = 0; s < opts.n_samples; ++s) {
    Vec y(g.dim());
    for (int d = 0; d < g.dim(); ++d)
      y[d] = g.lo(d) + (g.hi(d) - g.lo(d)) * rng::uniform01(gen);
    y0[static_cast<std::size_t>(s)] = y;
    const double wt = interp_linear(g, rho0, y, 0.0);
    w[static_cast<std::size_t>(s)] = wt;
    wsum += wt;
    wsq += wt * wt;
  }
  if (!(wsum > 0.0) || wsum * wsum / std::max(wsq, 1e-300) < opts.min_ess)
    throw IllConditionedEstimate("proposal weights carry too little effective mass");

  Proposition1Result res;
  res.times.reserve(pairs.size());

  // Integrate all proposal paths once; record states at the paired times.
  std::vector<Path> paths;
  paths.reserve(y0.size());
  for (const Vec& y : y0) paths.push_back(integrate_path(sys, y, noise));

  auto path_state_at = [&](const Path& p, double t, bool& ok) -> Vec {
    if (t <= 0.0) {
      ok = true;
      return p.state_at(0);
    }
    const auto it = std::lower_bound(p.times.begin(), p.times.end(), t - tol);
    if (it == p.times.end() || std::abs(*it - t) > tol) {
      ok = false;
      return Vec();
    }
    ok = true;
    return p.state_at(static_cast<std::size_t>(it - p.times.begin()));
  };

  for (const auto& [fi, ki] : pairs) {
    const RandomFieldState& zst = field.snapshots[fi];
    const GridDensity& rst = kernel.snapshots[ki];
    const double t = rst.time;
    const double lhs = grid_inner(g, rst.values, zst.values.col(0).array());

    double acc = 0.0;
    for (std::size_t s = 0; s < y0.size(); ++s) {
      if (w[s] == 0.0) continue;
      bool ok = false;
      const Vec xt = path_state_at(paths[s], t, ok);
      if (!ok) throw InvalidDiscretization("pairing time missing from a sample path");
      if (!g.contains(xt)) {
        ++res.escaped;
        continue;
      }
      acc += w[s] * interp_cubic(g, zst.values.col(0).array(), xt, t);
    }
    const double rhs = volume * acc / static_cast<double>(opts.n_samples);
    res.times.push_back(t);
    res.lhs.push_back(lhs);
    res.rhs.push_back(rhs);
    res.residual.push_back(std::abs(lhs - rhs));
  }
  res.max_residual = *std::max_element(res.residual.begin(), res.residual.end());
  return res;
}

}  // namespace gsde
