#pragma once

// Uniform tensor grids used by the density and random-field solvers.
// Values live on nodes (cells+1 per dimension, boundaries included) and are
// stored flattened with the last dimension fastest.

#include <functional>
#include <vector>

#include "gsde/errors.hpp"
#include "gsde/types.hpp"

namespace gsde {

class GridSpec {
 public:
  GridSpec() = default;

  /// Bounds lo < hi per dimension and at least 8 cells per dimension.
  GridSpec(Vec lo, Vec hi, std::vector<int> cells);

  int dim() const { return static_cast<int>(cells_.size()); }
  int cells(int d) const { return cells_[d]; }
  int nodes(int d) const { return cells_[d] + 1; }
  long total_nodes() const { return total_nodes_; }
  double lo(int d) const { return lo_[d]; }
  double hi(int d) const { return hi_[d]; }
  double spacing(int d) const { return spacing_[d]; }
  long stride(int d) const { return stride_[d]; }
  double cell_volume() const;

  bool contains(const Vec& x) const;
  Vec node_coord(long flat) const;
  long flat_index(const std::vector<int>& mi) const;
  void multi_index(long flat, std::vector<int>& mi) const;
  bool is_boundary(const std::vector<int>& mi) const;

  /// Trapezoid weight of the node (cell volume halved once per boundary hit).
  double quad_weight(const std::vector<int>& mi) const;

  bool same_as(const GridSpec& other) const;

 private:
  Vec lo_, hi_;
  std::vector<int> cells_;
  std::vector<double> spacing_;
  std::vector<long> stride_;
  long total_nodes_ = 0;
};

/// Scalar samples on a grid at one instant.
struct GridDensity {
  GridSpec grid;
  Eigen::ArrayXd values;
  double time = 0.0;
};

/// Samples f over the nodes; optionally rescales so the trapezoid mass is 1.
GridDensity make_grid_density(const GridSpec& grid,
                              const std::function<double(const Vec&)>& f,
                              bool normalize);

/// Trapezoid quadrature of the samples.
double grid_mass(const GridDensity& d);

/// Trapezoid quadrature of the product of two node arrays on `grid`.
double grid_inner(const GridSpec& grid, const Eigen::ArrayXd& u, const Eigen::ArrayXd& v);

/// Multilinear interpolation; throws DomainEscape(t) for points off the grid.
double interp_linear(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                     double t_for_error = 0.0);

/// Tensor-product Catmull-Rom interpolation (node slopes are central
/// differences, so this realizes "central differences with cubic value
/// interpolation"). Stencils clamp at the boundary.
double interp_cubic(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                    double t_for_error = 0.0);

/// Value, gradient and Hessian of the Catmull-Rom interpolant at x.
void interp_cubic_derivs(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                         double& value, Vec& grad, Mat& hess, double t_for_error = 0.0);

}  // namespace gsde
