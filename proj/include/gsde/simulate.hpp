#pragma once

// Strong path integration. The Euler-Maruyama step runs between jump times;
// jump times are kept exact by splitting the step grid at every event and
// allocating the stored Wiener increment to sub-segments in proportion to
// their length (the last sub-segment takes the exact floating-point
// remainder so block sums telescope).

#include <cstddef>
#include <string>
#include <vector>

#include "gsde/model.hpp"
#include "gsde/noise.hpp"
#include "gsde/types.hpp"

namespace gsde {

/// One integration interval (t0, t1] with its Wiener increment; any jumps
/// attached fire at t1, in order, after the diffusion update.
struct Segment {
  double t0 = 0.0;
  double t1 = 0.0;
  Vec dw;
  std::vector<JumpEvent> jumps;
};

/// Deterministic segment decomposition shared by every integrator that
/// consumes the same realization; guarantees pathwise coupling.
std::vector<Segment> build_segments(const NoiseRealization& noise);

/// A jump recorded on a path: the node it produced, the pre-jump state and
/// the mark that fired.
struct JumpRecord {
  std::size_t node_index = 0;
  double time = 0.0;
  Vec mark;
  Vec pre_state;
};

struct Path {
  std::vector<double> times;           // strictly increasing, times[0] = 0
  Mat states;                          // (#times) x n, post-jump at jump nodes
  std::vector<std::size_t> jump_indices;
  std::vector<JumpRecord> jump_records;

  int dim() const { return static_cast<int>(states.cols()); }
  Vec state_at(std::size_t i) const { return states.row(static_cast<Eigen::Index>(i)); }
};

/// Euler-Maruyama over the segment decomposition. Throws BlowUp (with the
/// last finite time) when the state leaves the representable range.
Path integrate_path(const SdeSystem& sys, const Vec& x0, const NoiseRealization& noise);

/// Increment series of a scalar observable along a path, one entry per
/// segment: drift bracket and Wiener contraction at the segment start plus
/// any jump differences at the segment end. Summing the series approximates
/// f(T, x(T)) - f(0, x0).
struct IncrementSeries {
  std::vector<double> times;       // segment end times
  std::vector<double> increments;  // aligned with times
  double total() const;
};

IncrementSeries apply_generalized_ito(const ScalarField& f, const SdeSystem& sys,
                                      const Path& path, const NoiseRealization& noise);

/// CSV rows: t, x_1 .. x_n, jump flag (1 on post-jump nodes).
void save_path_csv(const Path& path, const std::string& file);

}  // namespace gsde
