#include "gsde/jacobian.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gsde/errors.hpp"

namespace gsde {

JacobianPath integrate_jacobian(const SdeSystem& sys, const Path& path,
                                const NoiseRealization& noise) {
  const std::vector<Segment> segs = build_segments(noise);
  if (segs.size() + 1 != path.times.size())
    throw InvalidDiscretization("path and realization do not share a segment decomposition");

  JacobianPath jp;
  jp.times = path.times;
  jp.matrices.reserve(path.times.size());
  jp.dets.reserve(path.times.size());

  Mat J = Mat::Identity(sys.n, sys.n);
  jp.matrices.push_back(J);
  jp.dets.push_back(1.0);

  std::size_t rec = 0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const Segment& seg = segs[s];
    const double dt = seg.t1 - seg.t0;
    const Vec x = path.state_at(s);

    const Mat A = sys.a.jacobian(seg.t0, x);
    Mat Jn = J + (A * J) * dt;
    if (sys.m > 0) {
      // db/dx arrives as one n x m slab per coordinate; reassemble the
      // per-column sensitivity matrices (B_k)_{il} = db_ik/dx_l.
      const std::vector<Mat> db = sys.b.dx(seg.t0, x);
      for (int k = 0; k < sys.m; ++k) {
        Mat Bk(sys.n, sys.n);
        for (int l = 0; l < sys.n; ++l) Bk.col(l) = db[l].col(k);
        Jn += (Bk * J) * seg.dw[k];
      }
    }
    for (std::size_t j = 0; j < seg.jumps.size(); ++j, ++rec) {
      const JumpRecord& r = path.jump_records.at(rec);
      Jn = (Mat::Identity(sys.n, sys.n) + sys.g.dx(r.time, r.pre_state, r.mark)) * Jn;
    }
    if (!Jn.allFinite()) throw DegenerateJacobian("jacobian became non-finite");
    const double det = Jn.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300)
      throw DegenerateJacobian("jacobian became singular");
    J = Jn;
    jp.matrices.push_back(J);
    jp.dets.push_back(det);
  }
  return jp;
}

VolumeSeries volume_integral(const ScalarField& f, const ScalarField& rho0,
                             const std::vector<Path>& paths,
                             const std::vector<JacobianPath>& jacobians,
                             const VolumeOptions& opts) {
  if (paths.empty() || paths.size() != jacobians.size())
    throw InvalidDiscretization("volume integral needs matching path/jacobian ensembles");
  const std::size_t n_times = paths[0].times.size();
  for (const Path& p : paths) {
    if (p.times.size() != n_times || p.times != paths[0].times)
      throw InvalidDiscretization("ensemble paths must share one realization");
  }

  const std::size_t N = paths.size();
  std::vector<double> weights(N);
  double wsum = 0.0, wsq = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const Vec y = paths[i].state_at(0);
    const double q = rho0(0.0, y);
    if (!(q > 0.0))
      throw IllConditionedEstimate("proposal density vanishes at a sampled initial point");
    weights[i] = 1.0 / q;
    wsum += weights[i];
    wsq += weights[i] * weights[i];
  }
  const double ess = wsum * wsum / wsq;
  if (ess < opts.min_ess)
    throw IllConditionedEstimate("effective sample size " + std::to_string(ess) +
                                 " below threshold " + std::to_string(opts.min_ess));

  VolumeSeries out;
  out.times = paths[0].times;
  out.values.assign(n_times, 0.0);
  out.effective_sample_size = ess;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < n_times; ++t) {
      out.values[t] +=
          weights[i] * f(paths[i].times[t], paths[i].state_at(t)) * jacobians[i].dets[t];
    }
  }
  for (double& v : out.values) v /= static_cast<double>(N);
  return out;
}

std::vector<double> check_lemma1(const std::vector<GridDensity>& rho_series, const Path& path,
                                 const JacobianPath& jac, const GridDensity& rho0) {
  const Vec y = path.state_at(0);
  const double rho_init = interp_linear(rho0.grid, rho0.values, y, 0.0);
  std::vector<double> residuals;
  residuals.reserve(rho_series.size());
  for (const GridDensity& snap : rho_series) {
    // Locate the path node carrying this snapshot time.
    const auto it = std::lower_bound(path.times.begin(), path.times.end(), snap.time - 1e-12);
    if (it == path.times.end() || std::abs(*it - snap.time) > 1e-9)
      throw InvalidDiscretization("density snapshot time is not a path node");
    const std::size_t idx = static_cast<std::size_t>(it - path.times.begin());
    const Vec x = path.state_at(idx);
    if (!snap.grid.contains(x)) throw DomainEscape("path left the density grid", snap.time);
    const double rho_here = interp_linear(snap.grid, snap.values, x, snap.time);
    residuals.push_back(std::abs(rho_here * jac.dets[idx] - rho_init));
  }
  return residuals;
}

void save_jacobian_csv(const JacobianPath& jp, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file + " for writing");
  const int n = jp.matrices.empty() ? 0 : static_cast<int>(jp.matrices[0].rows());
  out << "t";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out << ",J" << (i + 1) << (j + 1);
  out << ",det\n";
  char buf[40];
  for (std::size_t k = 0; k < jp.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", jp.times[k]);
    out << buf;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", jp.matrices[k](i, j));
        out << "," << buf;
      }
    std::snprintf(buf, sizeof buf, "%.17g", jp.dets[k]);
    out << "," << buf << "\n";
  }
}

}  // namespace gsde
