#pragma once

// Coefficient fields and the jump-diffusion system they assemble into.
//
// A system couples a drift vector a(t,x), a diffusion matrix b(t,x) whose
// columns pair with independent Wiener components, and a jump amplitude
// g(t,x,mark) driven by a finite-activity Poisson measure. Fields carry
// optional analytic derivative callbacks; when absent, central finite
// differences with a per-field step are used. Every evaluation is checked
// for finiteness.
//
// All field objects are immutable after construction and safe to share
// across threads provided their callbacks are pure.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "gsde/errors.hpp"
#include "gsde/types.hpp"

namespace gsde {

/// Finite-difference steps: `first` for gradients/Jacobians and time
/// derivatives, `second` for Hessians.
struct FdSteps {
  double first = 1e-5;
  double second = 1e-4;
};

/// Scalar function of (t, x) with optional analytic derivatives.
class ScalarField {
 public:
  using Eval = std::function<double(double, const Vec&)>;
  using GradFn = std::function<Vec(double, const Vec&)>;
  using HessFn = std::function<Mat(double, const Vec&)>;
  using TderFn = std::function<double(double, const Vec&)>;

  ScalarField() = default;
  ScalarField(int dim, Eval eval) : dim_(dim), eval_(std::move(eval)) {}

  ScalarField& with_gradient(GradFn g) { grad_ = std::move(g); return *this; }
  ScalarField& with_hessian(HessFn h) { hess_ = std::move(h); return *this; }
  ScalarField& with_time_derivative(TderFn d) { tder_ = std::move(d); return *this; }
  ScalarField& with_fd_steps(FdSteps fd) { fd_ = fd; return *this; }

  int dim() const { return dim_; }
  const FdSteps& fd_steps() const { return fd_; }
  bool has_analytic_gradient() const { return static_cast<bool>(grad_); }
  bool has_analytic_hessian() const { return static_cast<bool>(hess_); }

  double operator()(double t, const Vec& x) const;
  Vec gradient(double t, const Vec& x) const;
  Mat hessian(double t, const Vec& x) const;
  double time_derivative(double t, const Vec& x) const;

 private:
  int dim_ = 0;
  Eval eval_;
  GradFn grad_;
  HessFn hess_;
  TderFn tder_;
  FdSteps fd_;
};

/// Vector function of (t, x) with optional analytic Jacobian (rows x dim_in).
class VectorField {
 public:
  using Eval = std::function<Vec(double, const Vec&)>;
  using JacFn = std::function<Mat(double, const Vec&)>;

  VectorField() = default;
  VectorField(int dim_in, int dim_out, Eval eval)
      : dim_in_(dim_in), dim_out_(dim_out), eval_(std::move(eval)) {}

  VectorField& with_jacobian(JacFn j) { jac_ = std::move(j); return *this; }
  VectorField& with_fd_steps(FdSteps fd) { fd_ = fd; return *this; }

  int dim_in() const { return dim_in_; }
  int dim_out() const { return dim_out_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  Vec operator()(double t, const Vec& x) const;
  Mat jacobian(double t, const Vec& x) const;

 private:
  int dim_in_ = 0;
  int dim_out_ = 0;
  Eval eval_;
  JacFn jac_;
  FdSteps fd_;
};

/// Matrix function of (t, x); value is rows x cols. The derivative dx(t,x)
/// returns one rows x cols matrix per input coordinate (entry l holds
/// d(value)/dx_l).
class MatrixField {
 public:
  using Eval = std::function<Mat(double, const Vec&)>;
  using DxFn = std::function<std::vector<Mat>(double, const Vec&)>;

  MatrixField() = default;
  MatrixField(int dim_in, int rows, int cols, Eval eval)
      : dim_in_(dim_in), rows_(rows), cols_(cols), eval_(std::move(eval)) {}

  MatrixField& with_dx(DxFn d) { dx_ = std::move(d); return *this; }
  MatrixField& with_fd_steps(FdSteps fd) { fd_ = fd; return *this; }

  int dim_in() const { return dim_in_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool has_analytic_dx() const { return static_cast<bool>(dx_); }

  Mat operator()(double t, const Vec& x) const;
  std::vector<Mat> dx(double t, const Vec& x) const;

 private:
  int dim_in_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  Eval eval_;
  DxFn dx_;
  FdSteps fd_;
};

/// Jump amplitude g(t, x, mark) with optional analytic state derivative
/// (dim_out x dim_in).
class JumpField {
 public:
  using Eval = std::function<Vec(double, const Vec&, const Vec&)>;
  using DxFn = std::function<Mat(double, const Vec&, const Vec&)>;

  JumpField() = default;
  JumpField(int dim_in, int dim_out, int mark_dim, Eval eval)
      : dim_in_(dim_in), dim_out_(dim_out), mark_dim_(mark_dim), eval_(std::move(eval)) {}

  JumpField& with_dx(DxFn d) { dx_ = std::move(d); return *this; }
  JumpField& with_fd_steps(FdSteps fd) { fd_ = fd; return *this; }

  int dim_in() const { return dim_in_; }
  int dim_out() const { return dim_out_; }
  int mark_dim() const { return mark_dim_; }
  bool has_analytic_dx() const { return static_cast<bool>(dx_); }

  Vec operator()(double t, const Vec& x, const Vec& mark) const;
  Mat dx(double t, const Vec& x, const Vec& mark) const;

 private:
  int dim_in_ = 0;
  int dim_out_ = 0;
  int mark_dim_ = 0;
  Eval eval_;
  DxFn dx_;
  FdSteps fd_;
};

/// Finite-activity Poisson random measure over a mark space.
///
/// `sampler` draws one mark from the given generator; `mark_grid` is a finite
/// deterministic set used by audits that must sweep the mark space.
struct JumpMeasure {
  double intensity = 0.0;
  int mark_dim = 0;
  std::function<Vec(std::mt19937_64&)> sampler;
  std::vector<Vec> mark_grid;
};

/// Returns a measure with zero intensity (no jumps ever fire).
JumpMeasure no_jumps();

/// The full system: dimensions, drift, diffusion, jump amplitude, measure.
///
/// `time_invariant` is a hint that every coefficient ignores t; grid solvers
/// use it to cache per-node coefficient evaluations.
struct SdeSystem {
  int n = 0;  // state dimension
  int m = 0;  // number of Wiener components
  VectorField a;
  MatrixField b;
  JumpField g;
  JumpMeasure measure;
  bool time_invariant = false;
};

/// Validates dimension consistency; throws InvalidDiscretization on mismatch.
SdeSystem make_system(int n, int m, VectorField a, MatrixField b, JumpField g,
                      JumpMeasure measure, bool time_invariant = false);

/// Convenience builders for absent coefficients.
VectorField zero_drift(int n);
MatrixField zero_diffusion(int n, int m);
JumpField zero_jump(int n, int mark_dim = 1);

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
  double det_tol = 1e-12;
};

/// Solves y + g(t, y, mark) = x for the pre-jump point y by damped Newton.
/// Throws InverseMapDivergence when the iteration fails to reach `tol`.
Vec inverse_jump_map(const SdeSystem& sys, double t, const Vec& x, const Vec& mark,
                     const NewtonOptions& opts = {});

/// Determinant of the Jacobian of the inverse transform x -> y, i.e.
/// 1 / det(I + dg/dx) evaluated at y = inverse_jump_map(...). Throws
/// SingularJumpMap when |det(I + dg/dx)| < det_tol.
double jump_jacobian_det(const SdeSystem& sys, double t, const Vec& x, const Vec& mark,
                         const NewtonOptions& opts = {});

/// Max over `points` of |analytic - central FD| for each derivative a field
/// registers; used by property tests guarding hand-written derivatives.
double max_gradient_mismatch(const ScalarField& f, double t, const std::vector<Vec>& points);
double max_jacobian_mismatch(const VectorField& f, double t, const std::vector<Vec>& points);

}  // namespace gsde
