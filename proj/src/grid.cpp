#include "gsde/grid.hpp"

#include <cmath>

namespace gsde {

GridSpec::GridSpec(Vec lo, Vec hi, std::vector<int> cells)
    : lo_(std::move(lo)), hi_(std::move(hi)), cells_(std::move(cells)) {
  const int d = static_cast<int>(cells_.size());
  if (d == 0 || lo_.size() != d || hi_.size() != d)
    throw InvalidDiscretization("grid bounds and cell counts disagree in dimension");
  spacing_.resize(d);
  stride_.resize(d);
  total_nodes_ = 1;
  for (int i = 0; i < d; ++i) {
    if (!(lo_[i] < hi_[i])) throw InvalidDiscretization("grid bounds must satisfy lo < hi");
    if (cells_[i] < 8) throw InvalidDiscretization("grids need at least 8 cells per dimension");
    spacing_[i] = (hi_[i] - lo_[i]) / cells_[i];
    total_nodes_ *= nodes(i);
  }
  long s = 1;
  for (int i = d - 1; i >= 0; --i) {
    stride_[i] = s;
    s *= nodes(i);
  }
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int d = 0; d < dim(); ++d) v *= spacing_[d];
  return v;
}

bool GridSpec::contains(const Vec& x) const {
  for (int d = 0; d < dim(); ++d) {
    const double slack = 1e-12 * (hi_[d] - lo_[d]);
    if (x[d] < lo_[d] - slack || x[d] > hi_[d] + slack) return false;
  }
  return true;
}

Vec GridSpec::node_coord(long flat) const {
  Vec x(dim());
  for (int d = 0; d < dim(); ++d) {
    long i = (flat / stride_[d]) % nodes(d);
    x[d] = lo_[d] + i * spacing_[d];
  }
  return x;
}

long GridSpec::flat_index(const std::vector<int>& mi) const {
  long f = 0;
  for (int d = 0; d < dim(); ++d) f += static_cast<long>(mi[d]) * stride_[d];
  return f;
}

void GridSpec::multi_index(long flat, std::vector<int>& mi) const {
  mi.resize(dim());
  for (int d = 0; d < dim(); ++d) mi[d] = static_cast<int>((flat / stride_[d]) % nodes(d));
}

bool GridSpec::is_boundary(const std::vector<int>& mi) const {
  for (int d = 0; d < dim(); ++d)
    if (mi[d] == 0 || mi[d] == cells_[d]) return true;
  return false;
}

double GridSpec::quad_weight(const std::vector<int>& mi) const {
  double w = cell_volume();
  for (int d = 0; d < dim(); ++d)
    if (mi[d] == 0 || mi[d] == cells_[d]) w *= 0.5;
  return w;
}

bool GridSpec::same_as(const GridSpec& other) const {
  if (dim() != other.dim()) return false;
  for (int d = 0; d < dim(); ++d) {
    if (cells_[d] != other.cells_[d] || lo_[d] != other.lo_[d] || hi_[d] != other.hi_[d])
      return false;
  }
  return true;
}

GridDensity make_grid_density(const GridSpec& grid,
                              const std::function<double(const Vec&)>& f,
                              bool normalize) {
  GridDensity d;
  d.grid = grid;
  d.values.resize(grid.total_nodes());
  for (long i = 0; i < grid.total_nodes(); ++i) d.values[i] = f(grid.node_coord(i));
  if (!d.values.isFinite().all())
    throw NumericalEvaluation("grid density sampling produced non-finite values");
  if (normalize) {
    double mass = grid_mass(d);
    if (!(mass > 0.0)) throw PositivityLoss("cannot normalize a grid density with mass <= 0");
    d.values /= mass;
  }
  return d;
}

double grid_mass(const GridDensity& d) {
  double s = 0.0;
  std::vector<int> mi;
  for (long i = 0; i < d.grid.total_nodes(); ++i) {
    d.grid.multi_index(i, mi);
    s += d.grid.quad_weight(mi) * d.values[i];
  }
  return s;
}

double grid_inner(const GridSpec& grid, const Eigen::ArrayXd& u, const Eigen::ArrayXd& v) {
  double s = 0.0;
  std::vector<int> mi;
  for (long i = 0; i < grid.total_nodes(); ++i) {
    grid.multi_index(i, mi);
    s += grid.quad_weight(mi) * u[i] * v[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Interpolation

namespace {

void require_inside(const GridSpec& grid, const Vec& x, double t) {
  if (!grid.contains(x)) throw DomainEscape("point left the grid domain", t);
}

/// Cell index and in-cell coordinate along one axis, clamped to valid range.
void locate(const GridSpec& grid, int d, double xd, int& cell, double& s) {
  double u = (xd - grid.lo(d)) / grid.spacing(d);
  cell = static_cast<int>(std::floor(u));
  if (cell < 0) cell = 0;
  if (cell > grid.cells(d) - 1) cell = grid.cells(d) - 1;
  s = u - cell;
  if (s < 0.0) s = 0.0;
  if (s > 1.0) s = 1.0;
}

/// Catmull-Rom weights and their first/second parameter derivatives.
void catmull_rom(double s, double w[4], double dw[4], double d2w[4]) {
  const double s2 = s * s, s3 = s2 * s;
  w[0] = -0.5 * s + s2 - 0.5 * s3;
  w[1] = 1.0 - 2.5 * s2 + 1.5 * s3;
  w[2] = 0.5 * s + 2.0 * s2 - 1.5 * s3;
  w[3] = -0.5 * s2 + 0.5 * s3;
  dw[0] = -0.5 + 2.0 * s - 1.5 * s2;
  dw[1] = -5.0 * s + 4.5 * s2;
  dw[2] = 0.5 + 4.0 * s - 4.5 * s2;
  dw[3] = -1.0 * s + 1.5 * s2;
  d2w[0] = 2.0 - 3.0 * s;
  d2w[1] = -5.0 + 9.0 * s;
  d2w[2] = 4.0 - 9.0 * s;
  d2w[3] = -1.0 + 3.0 * s;
}

struct CubicAxis {
  long offset[4];
  double w[4], dw[4], d2w[4];
};

void build_axis(const GridSpec& grid, int d, double xd, CubicAxis& ax) {
  int cell;
  double s;
  locate(grid, d, xd, cell, s);
  catmull_rom(s, ax.w, ax.dw, ax.d2w);
  for (int j = 0; j < 4; ++j) {
    int idx = cell - 1 + j;
    if (idx < 0) idx = 0;
    if (idx > grid.cells(d)) idx = grid.cells(d);
    ax.offset[j] = static_cast<long>(idx) * grid.stride(d);
  }
}

}  // namespace

double interp_linear(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                     double t_for_error) {
  require_inside(grid, x, t_for_error);
  const int dim = grid.dim();
  // Accumulate over the 2^dim cell corners.
  double result = 0.0;
  std::vector<int> cell(dim);
  std::vector<double> s(dim);
  for (int d = 0; d < dim; ++d) locate(grid, d, x[d], cell[d], s[d]);
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    long flat = 0;
    for (int d = 0; d < dim; ++d) {
      const int bit = (c >> d) & 1;
      w *= bit ? s[d] : (1.0 - s[d]);
      flat += static_cast<long>(cell[d] + bit) * grid.stride(d);
    }
    result += w * values[flat];
  }
  return result;
}

double interp_cubic(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                    double t_for_error) {
  double v;
  Vec grad;
  Mat hess;
  interp_cubic_derivs(grid, values, x, v, grad, hess, t_for_error);
  return v;
}

void interp_cubic_derivs(const GridSpec& grid, const Eigen::ArrayXd& values, const Vec& x,
                         double& value, Vec& grad, Mat& hess, double t_for_error) {
  require_inside(grid, x, t_for_error);
  const int dim = grid.dim();
  std::vector<CubicAxis> ax(dim);
  for (int d = 0; d < dim; ++d) build_axis(grid, d, x[d], ax[d]);

  value = 0.0;
  grad = Vec::Zero(dim);
  hess = Mat::Zero(dim, dim);

  // Walk the 4^dim stencil once, accumulating the value and every requested
  // derivative with the appropriate per-axis weight (w, dw or d2w).
  std::vector<int> j(dim, 0);
  for (;;) {
    long flat = 0;
    double w_all = 1.0;
    for (int d = 0; d < dim; ++d) {
      flat += ax[d].offset[j[d]];
      w_all *= ax[d].w[j[d]];
    }
    const double v = values[flat];
    value += w_all * v;
    for (int d = 0; d < dim; ++d) {
      double wd = ax[d].dw[j[d]] / grid.spacing(d);
      double rest = 1.0;
      for (int e = 0; e < dim; ++e)
        if (e != d) rest *= ax[e].w[j[e]];
      grad[d] += wd * rest * v;
      // Second derivatives: pure along d, mixed with e > d.
      double wdd = ax[d].d2w[j[d]] / (grid.spacing(d) * grid.spacing(d));
      hess(d, d) += wdd * rest * v;
      for (int e = d + 1; e < dim; ++e) {
        double we = ax[e].dw[j[e]] / grid.spacing(e);
        double rest2 = 1.0;
        for (int q = 0; q < dim; ++q)
          if (q != d && q != e) rest2 *= ax[q].w[j[q]];
        hess(d, e) += wd * we * rest2 * v;
      }
    }
    int d = dim - 1;
    for (; d >= 0; --d) {
      if (++j[d] < 4) break;
      j[d] = 0;
    }
    if (d < 0) break;
  }
  for (int d = 0; d < dim; ++d)
    for (int e = d + 1; e < dim; ++e) hess(e, d) = hess(d, e);
}

}  // namespace gsde
