#pragma once

// Grid solver for the density transported by the flow: between jumps
//   d rho = [ -d_i(rho a_i) + 1/2 d_i d_j(rho B_ij) ] dt - d_i(rho b_ik) dw_k,
// B = b b^T, and at a jump instant the full replacement
//   rho(x) <- rho(y(x)) * |D|,  y(x) the pre-jump point, D the inverse-map
// Jacobian determinant. Explicit stepping: conservative first-order upwind
// for the drift divergence, central second differences for the diffusion
// block, central first differences for the stochastic divergence. Boundary
// values are held at zero, so initial data must decay inside the box.
//
// The logarithmic variant evolves L = ln rho with the same noise; exp(L)
// tracking the direct solve is a scheme cross-check.

#include <cstdint>
#include <functional>
#include <vector>

#include "gsde/grid.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"

namespace gsde {

struct KernelOptions {
  int snapshot_stride = 0;   // keep every k-th step (0 = first and last only)
  double c_cfl = 0.25;       // h <= c_cfl dx^2 / max eig B (diffusive constraint)
  double c_advect = 0.9;     // h <= c_advect dx / max |a_d| (advective constraint)
  double mass_fail = 0.1;    // |mass - mass(0)| beyond this flags mass_loss
  std::function<void(double, const GridDensity&)> observer;  // after every segment
};

struct KernelRunResult {
  std::vector<GridDensity> snapshots;  // always includes t=0 and t=T
  std::vector<double> mass_times;
  std::vector<double> mass_series;
  bool mass_loss = false;
  double min_value = 0.0;  // most negative node seen (undershoot monitor)
};

KernelRunResult evolve_kernel(const SdeSystem& sys, const GridDensity& rho0,
                              const NoiseRealization& noise, const KernelOptions& opts = {});

/// Trapezoid mass; complements the mass series for standalone snapshots.
double check_normalization(const GridDensity& d);

/// Evolves ln(rho); snapshots hold the log values. Requires strictly
/// positive initial data (PositivityLoss otherwise).
KernelRunResult evolve_log_kernel(const SdeSystem& sys, const GridDensity& rho0,
                                  const NoiseRealization& noise, const KernelOptions& opts = {});

/// Several densities advanced through one realization on one grid.
struct KernelCollection {
  std::vector<KernelRunResult> kernels;
};

/// Runs every initial density through the same noise after verifying that
/// the initial family is linearly independent (Gram matrix of quadrature
/// inner products has full numerical rank).
KernelCollection evolve_kernel_collection(const SdeSystem& sys,
                                          const std::vector<GridDensity>& rho0s,
                                          const NoiseRealization& noise,
                                          const KernelOptions& opts = {});

/// Pointwise ratio of kernel l to the last kernel at each snapshot time.
/// Nodes where the denominator magnitude is below `floor` are flagged;
/// evaluating there throws RatioUndefined.
class RatioField {
 public:
  RatioField(GridSpec grid, std::vector<double> times, std::vector<Eigen::ArrayXd> values,
             std::vector<std::vector<std::uint8_t>> defined)
      : grid_(std::move(grid)), times_(std::move(times)), values_(std::move(values)),
        defined_(std::move(defined)) {}

  const std::vector<double>& times() const { return times_; }
  const GridSpec& grid() const { return grid_; }

  /// Multilinear interpolation at snapshot index `ti`; every stencil node
  /// must be defined.
  double eval(std::size_t ti, const Vec& x) const;

 private:
  GridSpec grid_;
  std::vector<double> times_;
  std::vector<Eigen::ArrayXd> values_;
  std::vector<std::vector<std::uint8_t>> defined_;
};

std::vector<RatioField> build_first_integrals(const KernelCollection& collection,
                                              double ratio_floor = 1e-8);

}  // namespace gsde
