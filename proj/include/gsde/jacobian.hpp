#pragma once

// State-space sensitivity J(t) = dx(t;y)/dy propagated along a path, the
// importance-sampled moving-volume integral built from an ensemble of
// (path, Jacobian) pairs, and the pullback identity check
// rho(t, x(t;y)) * det J(t;y) = rho(0, y).

#include <vector>

#include "gsde/grid.hpp"
#include "gsde/model.hpp"
#include "gsde/simulate.hpp"
#include "gsde/types.hpp"

namespace gsde {

struct JacobianPath {
  std::vector<double> times;  // same nodes as the driving path
  std::vector<Mat> matrices;  // J at each node, J(0) = I
  std::vector<double> dets;   // det J at each node
};

/// Euler scheme for the variational system: between jumps
/// dJ = (da/dx J) dt + sum_k (db_k/dx J) dw_k with derivatives taken at the
/// current path point; at a jump, J <- (I + dg/dx at the pre-jump point) J.
/// Throws DegenerateJacobian when J becomes singular or non-finite.
JacobianPath integrate_jacobian(const SdeSystem& sys, const Path& path,
                                const NoiseRealization& noise);

struct VolumeOptions {
  double min_ess = 4.0;  // minimum effective sample size before bailing out
};

/// Time series of the moving-volume integral of f: initial points y_i are
/// assumed drawn from the proposal density rho0, so each path contributes
/// f(t, x_i(t)) det J_i(t) / rho0(0, y_i), averaged over the ensemble.
/// All paths must share one realization (identical time arrays).
struct VolumeSeries {
  std::vector<double> times;
  std::vector<double> values;
  double effective_sample_size = 0.0;
};

VolumeSeries volume_integral(const ScalarField& f, const ScalarField& rho0,
                             const std::vector<Path>& paths,
                             const std::vector<JacobianPath>& jacobians,
                             const VolumeOptions& opts = {});

/// Residual |rho(t, x(t;y)) det J(t) - rho(0, y)| at every density snapshot,
/// with rho interpolated multilinearly. rho0 supplies rho(0, y).
std::vector<double> check_lemma1(const std::vector<GridDensity>& rho_series, const Path& path,
                                 const JacobianPath& jac, const GridDensity& rho0);

/// CSV rows: t, J11, J12, ..., Jnn, det.
void save_jacobian_csv(const JacobianPath& jp, const std::string& file);

}  // namespace gsde
