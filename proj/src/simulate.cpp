#include "gsde/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gsde/errors.hpp"

namespace gsde {

std::vector<Segment> build_segments(const NoiseRealization& noise) {
  for (const JumpEvent& e : noise.jumps) {
    if (!(e.time > 0.0) || e.time > noise.horizon + 1e-12 * std::max(1.0, noise.horizon))
      throw InvalidDiscretization("jump times must lie inside (0, T]");
  }
  std::vector<Segment> segs;
  segs.reserve(noise.steps + noise.jumps.size());
  std::size_t jpos = 0;
  for (int i = 0; i < noise.steps; ++i) {
    const double t0 = noise.time_at(i);
    const double t1 = (i + 1 == noise.steps) ? noise.horizon : noise.time_at(i + 1);
    const Vec full = noise.increments.row(i);
    Vec allocated = Vec::Zero(noise.wiener_dim);
    double cursor = t0;
    while (jpos < noise.jumps.size() && noise.jumps[jpos].time <= t1) {
      const JumpEvent& e = noise.jumps[jpos];
      if (e.time > cursor) {
        Segment s;
        s.t0 = cursor;
        s.t1 = e.time;
        s.dw = full * ((e.time - t0) / (t1 - t0)) - allocated;
        allocated += s.dw;
        s.jumps.push_back(e);
        cursor = e.time;
        segs.push_back(std::move(s));
      } else {
        // Event lands exactly on an existing segment end (including a tie
        // with a previous event); attach it there.
        if (segs.empty()) throw InvalidDiscretization("jump time collides with t=0");
        segs.back().jumps.push_back(e);
      }
      ++jpos;
    }
    if (cursor < t1) {
      Segment s;
      s.t0 = cursor;
      s.t1 = t1;
      s.dw = full - allocated;  // exact remainder keeps block sums intact
      segs.push_back(std::move(s));
    }
  }
  return segs;
}

Path integrate_path(const SdeSystem& sys, const Vec& x0, const NoiseRealization& noise) {
  if (x0.size() != sys.n) throw InvalidDiscretization("initial state dimension mismatch");
  const std::vector<Segment> segs = build_segments(noise);

  Path p;
  p.times.reserve(segs.size() + 1);
  p.states.resize(static_cast<Eigen::Index>(segs.size()) + 1, sys.n);
  p.times.push_back(0.0);
  p.states.row(0) = x0;

  Vec x = x0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const Segment& seg = segs[s];
    const double dt = seg.t1 - seg.t0;
    Vec xn = x + sys.a(seg.t0, x) * dt + sys.b(seg.t0, x) * seg.dw;
    for (const JumpEvent& e : seg.jumps) {
      JumpRecord rec;
      rec.node_index = s + 1;
      rec.time = seg.t1;
      rec.mark = e.mark;
      rec.pre_state = xn;
      xn = xn + sys.g(seg.t1, xn, e.mark);
      p.jump_records.push_back(std::move(rec));
    }
    if (!xn.allFinite()) throw BlowUp("path became non-finite", seg.t0);
    x = xn;
    p.times.push_back(seg.t1);
    p.states.row(static_cast<Eigen::Index>(s) + 1) = x;
    if (!seg.jumps.empty()) p.jump_indices.push_back(s + 1);
  }
  return p;
}

double IncrementSeries::total() const {
  return std::accumulate(increments.begin(), increments.end(), 0.0);
}

IncrementSeries apply_generalized_ito(const ScalarField& f, const SdeSystem& sys,
                                      const Path& path, const NoiseRealization& noise) {
  if (f.dim() != sys.n) throw InvalidDiscretization("observable dimension mismatch");
  const std::vector<Segment> segs = build_segments(noise);
  if (segs.size() + 1 != path.times.size())
    throw InvalidDiscretization("path and realization do not share a segment decomposition");

  IncrementSeries out;
  out.times.reserve(segs.size());
  out.increments.reserve(segs.size());
  std::size_t rec = 0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const Segment& seg = segs[s];
    const double dt = seg.t1 - seg.t0;
    const Vec x = path.state_at(s);

    // Drift bracket: time derivative, drift contraction and the half-trace
    // diffusion term; then the Wiener contraction with this segment's dw.
    const Vec grad = f.gradient(seg.t0, x);
    const Mat hess = f.hessian(seg.t0, x);
    const Mat b = sys.b(seg.t0, x);
    const Vec a = sys.a(seg.t0, x);
    double drift = f.time_derivative(seg.t0, x) + a.dot(grad);
    drift += 0.5 * (b * b.transpose()).cwiseProduct(hess).sum();
    double inc = drift * dt + (b.transpose() * grad).dot(seg.dw);

    for (std::size_t j = 0; j < seg.jumps.size(); ++j, ++rec) {
      const JumpRecord& r = path.jump_records.at(rec);
      const Vec post = r.pre_state + sys.g(r.time, r.pre_state, r.mark);
      inc += f(r.time, post) - f(r.time, r.pre_state);
    }
    out.times.push_back(seg.t1);
    out.increments.push_back(inc);
  }
  return out;
}

void save_path_csv(const Path& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file + " for writing");
  out << "t";
  for (int i = 0; i < path.dim(); ++i) out << ",x" << (i + 1);
  out << ",jump\n";
  std::size_t jp = 0;
  char buf[40];
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", path.times[i]);
    out << buf;
    for (int c = 0; c < path.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", path.states(static_cast<Eigen::Index>(i), c));
      out << "," << buf;
    }
    bool is_jump = jp < path.jump_indices.size() && path.jump_indices[jp] == i;
    if (is_jump) ++jp;
    out << "," << (is_jump ? 1 : 0) << "\n";
  }
}

}  // namespace gsde
