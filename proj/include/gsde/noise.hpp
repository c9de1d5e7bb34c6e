#pragma once

// Pre-generated driving noise: Wiener increments on a uniform step grid plus
// exact Poisson jump times with marks. A realization is a pure function of
// its seed, so two runs with the same SeedSpec agree bit for bit.

#include <cstdint>
#include <string>
#include <vector>

#include "gsde/model.hpp"
#include "gsde/types.hpp"

namespace gsde {

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

struct JumpEvent {
  double time = 0.0;
  Vec mark;
};

struct NoiseRealization {
  double horizon = 0.0;  // T
  double step = 0.0;     // h
  int steps = 0;         // T / h
  int wiener_dim = 0;    // m
  SeedSpec seed;
  Mat increments;                // steps x m, each entry ~ N(0, h)
  std::vector<JumpEvent> jumps;  // strictly inside (0, T], sorted by time

  double time_at(int i) const { return i * step; }

  /// FNV-1a over the exact bit patterns of h, T and all samples. Stable
  /// across runs; reported so artifacts can assert they replay the same draw.
  std::uint64_t checksum() const;
};

/// Deterministic generation: `steps = round(T/h)` Wiener rows, then a
/// homogeneous Poisson point set with one mark per event. Requires T > 0,
/// h > 0 and h dividing T within rounding slack.
NoiseRealization generate_noise(const SeedSpec& seed, double T, double h, int m,
                                const JumpMeasure& measure);

/// Couples refinement levels: produces the coarse realization whose Wiener
/// increments are exact block sums of `fine` and whose jump events are
/// identical. `coarse_h` must be an integer multiple of the fine step.
NoiseRealization refine_noise(double coarse_h, const NoiseRealization& fine);

/// Text dump for replay; doubles are written with 17 significant digits so
/// load_noise_csv(save_noise_csv(r)) reproduces r exactly.
void save_noise_csv(const NoiseRealization& r, const std::string& path);
NoiseRealization load_noise_csv(const std::string& path);

/// Hex string of checksum(), as printed in reports.
std::string checksum_hex(const NoiseRealization& r);

}  // namespace gsde
