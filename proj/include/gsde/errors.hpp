#pragma once

#include <stdexcept>
#include <string>

namespace gsde {

/// Base class for every failure the library raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coefficient or candidate field returned NaN/Inf at some evaluation point.
class NumericalEvaluation : public Error {
 public:
  using Error::Error;
};

/// Newton iteration for the pre-jump point failed to converge.
class InverseMapDivergence : public Error {
 public:
  using Error::Error;
};

/// det(I + dg/dx) fell below tolerance; the jump map is not invertible there.
class SingularJumpMap : public Error {
 public:
  using Error::Error;
};

/// Bad step/horizon combination, non-integer coarsening ratio, malformed levels.
class InvalidDiscretization : public Error {
 public:
  using Error::Error;
};

/// A trajectory left the representable range; carries the last finite time.
class BlowUp : public Error {
 public:
  BlowUp(const std::string& msg, double t) : Error(msg), last_finite_time(t) {}
  double last_finite_time;
};

/// Propagated Jacobian became singular or non-finite.
class DegenerateJacobian : public Error {
 public:
  using Error::Error;
};

/// Importance-weighted estimate has too small an effective sample size.
class IllConditionedEstimate : public Error {
 public:
  using Error::Error;
};

/// A point needed for interpolation lies outside the grid; carries the time.
class DomainEscape : public Error {
 public:
  DomainEscape(const std::string& msg, double t) : Error(msg), escape_time(t) {}
  double escape_time;
};

/// Explicit grid stepping would violate its stability constraint.
class UnstableDiscretization : public Error {
 public:
  using Error::Error;
};

/// Logarithmic evolution was asked to take log of a non-positive value.
class PositivityLoss : public Error {
 public:
  using Error::Error;
};

/// A kernel-ratio field was evaluated where its denominator is below the floor.
class RatioUndefined : public Error {
 public:
  using Error::Error;
};

}  // namespace gsde
