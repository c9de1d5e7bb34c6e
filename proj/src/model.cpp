#include "gsde/model.hpp"

#include <cmath>
#include <sstream>

namespace gsde {

namespace {

std::string describe_point(double t, const Vec& x) {
  std::ostringstream os;
  os << "t=" << t << ", x=(";
  for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ")";
  return os.str();
}

void require_finite(double v, const char* what, double t, const Vec& x) {
  if (!std::isfinite(v)) {
    throw NumericalEvaluation(std::string(what) + " returned a non-finite value at " +
                              describe_point(t, x));
  }
}

void require_finite(const Eigen::Ref<const Mat>& v, const char* what, double t, const Vec& x) {
  if (!v.allFinite()) {
    throw NumericalEvaluation(std::string(what) + " returned a non-finite value at " +
                              describe_point(t, x));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ScalarField

double ScalarField::operator()(double t, const Vec& x) const {
  double v = eval_(t, x);
  require_finite(v, "scalar field", t, x);
  return v;
}

Vec ScalarField::gradient(double t, const Vec& x) const {
  if (grad_) {
    Vec g = grad_(t, x);
    require_finite(g, "scalar field gradient", t, x);
    return g;
  }
  const double h = fd_.first;
  Vec g(dim_);
  Vec xp = x, xm = x;
  for (int i = 0; i < dim_; ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = ((*this)(t, xp) - (*this)(t, xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

Mat ScalarField::hessian(double t, const Vec& x) const {
  if (hess_) {
    Mat hm = hess_(t, x);
    require_finite(hm, "scalar field hessian", t, x);
    return hm;
  }
  const double h = fd_.second;
  Mat hm(dim_, dim_);
  const double f0 = (*this)(t, x);
  Vec xa = x;
  for (int i = 0; i < dim_; ++i) {
    xa[i] = x[i] + h;
    const double fp = (*this)(t, xa);
    xa[i] = x[i] - h;
    const double fm = (*this)(t, xa);
    xa[i] = x[i];
    hm(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int j = i + 1; j < dim_; ++j) {
      xa[i] = x[i] + h; xa[j] = x[j] + h;
      const double fpp = (*this)(t, xa);
      xa[j] = x[j] - h;
      const double fpm = (*this)(t, xa);
      xa[i] = x[i] - h; xa[j] = x[j] + h;
      const double fmp = (*this)(t, xa);
      xa[j] = x[j] - h;
      const double fmm = (*this)(t, xa);
      xa[i] = x[i]; xa[j] = x[j];
      hm(i, j) = hm(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return hm;
}

double ScalarField::time_derivative(double t, const Vec& x) const {
  if (tder_) {
    double v = tder_(t, x);
    require_finite(v, "scalar field time derivative", t, x);
    return v;
  }
  const double h = fd_.first;
  return ((*this)(t + h, x) - (*this)(t - h, x)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// VectorField

Vec VectorField::operator()(double t, const Vec& x) const {
  Vec v = eval_(t, x);
  require_finite(v, "vector field", t, x);
  return v;
}

Mat VectorField::jacobian(double t, const Vec& x) const {
  if (jac_) {
    Mat j = jac_(t, x);
    require_finite(j, "vector field jacobian", t, x);
    return j;
  }
  const double h = fd_.first;
  Mat j(dim_out_, dim_in_);
  Vec xa = x;
  for (int l = 0; l < dim_in_; ++l) {
    xa[l] = x[l] + h;
    Vec fp = (*this)(t, xa);
    xa[l] = x[l] - h;
    Vec fm = (*this)(t, xa);
    xa[l] = x[l];
    j.col(l) = (fp - fm) / (2.0 * h);
  }
  return j;
}

// ---------------------------------------------------------------------------
// MatrixField

Mat MatrixField::operator()(double t, const Vec& x) const {
  Mat v = eval_(t, x);
  require_finite(v, "matrix field", t, x);
  return v;
}

std::vector<Mat> MatrixField::dx(double t, const Vec& x) const {
  if (dx_) {
    std::vector<Mat> d = dx_(t, x);
    for (const Mat& mtx : d) require_finite(mtx, "matrix field derivative", t, x);
    return d;
  }
  const double h = fd_.first;
  std::vector<Mat> d(dim_in_);
  Vec xa = x;
  for (int l = 0; l < dim_in_; ++l) {
    xa[l] = x[l] + h;
    Mat fp = (*this)(t, xa);
    xa[l] = x[l] - h;
    Mat fm = (*this)(t, xa);
    xa[l] = x[l];
    d[l] = (fp - fm) / (2.0 * h);
  }
  return d;
}

// ---------------------------------------------------------------------------
// JumpField

Vec JumpField::operator()(double t, const Vec& x, const Vec& mark) const {
  Vec v = eval_(t, x, mark);
  require_finite(v, "jump field", t, x);
  return v;
}

Mat JumpField::dx(double t, const Vec& x, const Vec& mark) const {
  if (dx_) {
    Mat j = dx_(t, x, mark);
    require_finite(j, "jump field derivative", t, x);
    return j;
  }
  const double h = fd_.first;
  Mat j(dim_out_, dim_in_);
  Vec xa = x;
  for (int l = 0; l < dim_in_; ++l) {
    xa[l] = x[l] + h;
    Vec fp = (*this)(t, xa, mark);
    xa[l] = x[l] - h;
    Vec fm = (*this)(t, xa, mark);
    xa[l] = x[l];
    j.col(l) = (fp - fm) / (2.0 * h);
  }
  return j;
}

// ---------------------------------------------------------------------------
// System assembly

JumpMeasure no_jumps() {
  JumpMeasure m;
  m.intensity = 0.0;
  m.mark_dim = 1;
  return m;
}

VectorField zero_drift(int n) {
  return VectorField(n, n, [n](double, const Vec&) { return Vec::Zero(n); })
      .with_jacobian([n](double, const Vec&) { return Mat::Zero(n, n); });
}

MatrixField zero_diffusion(int n, int m) {
  return MatrixField(n, n, m, [n, m](double, const Vec&) { return Mat::Zero(n, m); })
      .with_dx([n, m](double, const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, m)); });
}

JumpField zero_jump(int n, int mark_dim) {
  return JumpField(n, n, mark_dim, [n](double, const Vec&, const Vec&) { return Vec::Zero(n); })
      .with_dx([n](double, const Vec&, const Vec&) { return Mat::Zero(n, n); });
}

SdeSystem make_system(int n, int m, VectorField a, MatrixField b, JumpField g,
                      JumpMeasure measure, bool time_invariant) {
  if (n <= 0 || m < 0) throw InvalidDiscretization("system dimensions must satisfy n>0, m>=0");
  if (a.dim_in() != n || a.dim_out() != n)
    throw InvalidDiscretization("drift field dimensions do not match the system");
  if (b.dim_in() != n || b.rows() != n || b.cols() != m)
    throw InvalidDiscretization("diffusion field dimensions do not match the system");
  if (g.dim_in() != n || g.dim_out() != n)
    throw InvalidDiscretization("jump field dimensions do not match the system");
  if (measure.intensity < 0.0)
    throw InvalidDiscretization("jump intensity must be non-negative");
  if (measure.intensity > 0.0) {
    if (!measure.sampler)
      throw InvalidDiscretization("a positive-intensity measure needs a mark sampler");
    if (measure.mark_grid.empty())
      throw InvalidDiscretization("a positive-intensity measure needs a non-empty mark grid");
    if (measure.mark_dim != g.mark_dim())
      throw InvalidDiscretization("mark dimension mismatch between measure and jump field");
  }
  SdeSystem sys;
  sys.n = n;
  sys.m = m;
  sys.a = std::move(a);
  sys.b = std::move(b);
  sys.g = std::move(g);
  sys.measure = std::move(measure);
  sys.time_invariant = time_invariant;
  return sys;
}

// ---------------------------------------------------------------------------
// Inverse jump map

Vec inverse_jump_map(const SdeSystem& sys, double t, const Vec& x, const Vec& mark,
                     const NewtonOptions& opts) {
  // Solve F(y) = y + g(t,y,mark) - x = 0. Start from x itself; for small
  // jumps that is already close, and damping handles the rest.
  Vec y = x;
  Vec f = y + sys.g(t, y, mark) - x;
  double fnorm = f.norm();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (fnorm <= opts.tol) return y;
    Mat jac = Mat::Identity(sys.n, sys.n) + sys.g.dx(t, y, mark);
    Eigen::PartialPivLU<Mat> lu(jac);
    Vec step = lu.solve(-f);
    if (!step.allFinite())
      throw InverseMapDivergence("inverse jump map: Newton step is not finite");
    // Backtracking: halve until the residual actually shrinks.
    double alpha = 1.0;
    for (;;) {
      Vec y_try = y + alpha * step;
      Vec f_try = y_try + sys.g(t, y_try, mark) - x;
      double n_try = f_try.norm();
      if (n_try < fnorm) {
        y = y_try;
        f = f_try;
        fnorm = n_try;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-8) {
        throw InverseMapDivergence(
            "inverse jump map: damped Newton stalled at residual " + std::to_string(fnorm));
      }
    }
  }
  if (fnorm <= opts.tol) return y;
  throw InverseMapDivergence("inverse jump map: no convergence after " +
                             std::to_string(opts.max_iter) + " iterations, residual " +
                             std::to_string(fnorm));
}

double jump_jacobian_det(const SdeSystem& sys, double t, const Vec& x, const Vec& mark,
                         const NewtonOptions& opts) {
  Vec y = inverse_jump_map(sys, t, x, mark, opts);
  Mat fwd = Mat::Identity(sys.n, sys.n) + sys.g.dx(t, y, mark);
  double det = fwd.determinant();
  if (!std::isfinite(det) || std::abs(det) < opts.det_tol) {
    throw SingularJumpMap("jump map derivative is singular (det=" + std::to_string(det) + ")");
  }
  return 1.0 / det;
}

// ---------------------------------------------------------------------------
// Derivative audits

double max_gradient_mismatch(const ScalarField& f, double t, const std::vector<Vec>& points) {
  ScalarField fd_only(f.dim(), [&f](double tt, const Vec& xx) { return f(tt, xx); });
  fd_only.with_fd_steps(f.fd_steps());
  double worst = 0.0;
  for (const Vec& x : points) {
    if (f.has_analytic_gradient())
      worst = std::max(worst, (f.gradient(t, x) - fd_only.gradient(t, x)).cwiseAbs().maxCoeff());
    if (f.has_analytic_hessian())
      worst = std::max(worst, (f.hessian(t, x) - fd_only.hessian(t, x)).cwiseAbs().maxCoeff());
  }
  return worst;
}

double max_jacobian_mismatch(const VectorField& f, double t, const std::vector<Vec>& points) {
  if (!f.has_analytic_jacobian()) return 0.0;
  VectorField fd_only(f.dim_in(), f.dim_out(),
                      [&f](double tt, const Vec& xx) { return f(tt, xx); });
  double worst = 0.0;
  for (const Vec& x : points) {
    worst = std::max(worst, (f.jacobian(t, x) - fd_only.jacobian(t, x)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace gsde
