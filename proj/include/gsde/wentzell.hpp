#pragma once

// Random fields z(t;x) driven nodewise by
//   dz = Pi(t,x) dt + D_k(t,x) dw_k + G(t,x,gamma) d(jump count),
// their composition with a trajectory of the state SDE, and the pathwise
// comparison that validates the composition's differential: the increment of
// zeta(t) = z(t, x(t)) is integrated directly from
//   (D_k + b_ik dz/dx_i) dw_k
//   + (Pi + a_i dz/dx_i + b_ik dD_k/dx_i + 1/2 b_ik b_jk d2z/dx_i dx_j) dt
//   + [G(tau, x + g, gamma) + z(tau-, x + g) - z(tau-, x)] at jump events,
// all spatial derivatives taken from the grid interpolant at the current
// path point. Field evolution, path and formula consume one realization, so
// the gap between the integrated series and the composed one is pure
// discretization error.

#include <cstdint>
#include <functional>
#include <vector>

#include "gsde/grid.hpp"
#include "gsde/kernel.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"
#include "gsde/simulate.hpp"

namespace gsde {

/// Field dynamics: Pi is (t,x) -> n0, D is (t,x) -> n0 x m (one column per
/// Wiener component), G is (t,x,mark) -> n0.
struct FieldSystem {
  int n0 = 0;
  VectorField Pi;
  MatrixField D;
  JumpField G;
  bool time_invariant = false;
};

/// Validates shape consistency against a state dimension n and Wiener count m.
FieldSystem make_field_system(int n0, int n, int m, VectorField Pi, MatrixField D,
                              JumpField G, bool time_invariant = false);

/// Field samples on a grid at one instant; values is total_nodes x n0 with
/// each component stored contiguously.
struct RandomFieldState {
  GridSpec grid;
  Mat values;
  double time = 0.0;
};

RandomFieldState make_field_state(const GridSpec& grid, int n0,
                                  const std::function<Vec(const Vec&)>& z0);

struct FieldRunOptions {
  int snapshot_stride = 0;  // keep every k-th uniform step (0 = ends only)
  std::function<void(double, const RandomFieldState&)> observer;
};

struct FieldRunResult {
  std::vector<RandomFieldState> snapshots;  // always includes t=0 and t=T
};

/// Advances every node through the realization. Throws BlowUp when a value
/// leaves the representable range.
FieldRunResult evolve_field(const FieldSystem& fs, const RandomFieldState& z0,
                            const NoiseRealization& noise, const FieldRunOptions& opts = {});

/// Cubic interpolation of every field component at x.
Vec compose_direct(const RandomFieldState& field, const Vec& x);

/// compose_direct at each path node against the matching snapshot; requires
/// the snapshots to cover every path time (stride 1 over a jump-free run, or
/// an observer-driven capture otherwise).
Mat compose_direct(const FieldRunResult& series, const Path& path);

struct WentzellComparison {
  std::vector<double> times;  // t=0 and every segment end
  Mat formula;                // (#times) x n0, increment-integrated composition
  Mat direct;                 // (#times) x n0, field interpolated at the path
  Path path;
  double max_gap = 0.0;       // sup over times and components of |formula - direct|
};

/// Runs field, path and increment formula in lockstep on one realization.
WentzellComparison run_wentzell_comparison(const SdeSystem& sys, const FieldSystem& fs,
                                           const GridSpec& grid,
                                           const std::function<Vec(const Vec&)>& z0,
                                           const Vec& x0, const NoiseRealization& noise);

/// Increment-integrated composition series only (the formula side).
struct WentzellSeries {
  std::vector<double> times;
  Mat values;  // (#times) x n0
};

WentzellSeries integrate_wentzell(const SdeSystem& sys, const FieldSystem& fs,
                                  const GridSpec& grid,
                                  const std::function<Vec(const Vec&)>& z0, const Vec& x0,
                                  const NoiseRealization& noise);

struct Proposition1Options {
  int n_samples = 2048;             // initial points for the right-hand side
  std::uint64_t sample_seed = 101;  // stream used for the uniform proposal
  double min_ess = 4.0;             // effective-sample-size floor on the weights
};

struct Proposition1Result {
  std::vector<double> times;
  std::vector<double> lhs;       // grid quadrature of rho_t * z_t
  std::vector<double> rhs;       // MC estimate of the initial-point integral
  std::vector<double> residual;  // |lhs - rhs|
  double max_residual = 0.0;
  long escaped = 0;  // path points outside the field grid, skipped on the RHS
};

/// Consistency of the evolved pair (density, field) under shared noise:
/// integral of rho(t)z(t) over the grid against the Monte Carlo estimate of
/// integral rho(0;y) z(t; x(t;y)) dy with paths driven by the same
/// realization. Field components must be scalar (n0 = 1) and the two series
/// must live on one grid with matching snapshot times.
Proposition1Result check_proposition1(const SdeSystem& sys, const FieldRunResult& field,
                                      const KernelRunResult& kernel,
                                      const NoiseRealization& noise,
                                      const Proposition1Options& opts = {});

}  // namespace gsde
