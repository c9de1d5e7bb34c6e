#pragma once

// Named, fully wired example systems used by the command-line tool and the
// test suite. Every coefficient carries analytic derivatives so certification
// runs at machine precision; the registry is the single place where initial
// points, grids and step defaults live.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gsde/grid.hpp"
#include "gsde/model.hpp"
#include "gsde/wentzell.hpp"

namespace gsde {

struct Scenario {
  std::string name;
  std::string description;
  SdeSystem system;
  Vec x0;

  bool has_candidate = false;
  ScalarField candidate;  // first-integral candidate u(t;x)

  bool has_field = false;
  FieldSystem field;  // random field driven alongside the state
  std::function<Vec(const Vec&)> field_init;
  GridSpec field_grid;

  GridSpec default_grid;  // state-space grid for density work
  double default_T = 1.0;
  double default_h = 1e-2;

  // Gaussian (center, sigma) pairs seeding density evolutions.
  std::vector<std::pair<Vec, double>> kernel_seeds;
};

/// Registered names, in presentation order.
const std::vector<std::string>& scenario_names();

/// Builds a registered scenario; throws InvalidDiscretization for unknown
/// names.
Scenario make_scenario(const std::string& name);

/// Normalized Gaussian samples on the grid (unit trapezoid mass).
GridDensity gaussian_density(const GridSpec& grid, const Vec& center, double sigma);

/// Same system with drift a(t,x) + eps*x; analytic Jacobian adjusted to
/// match. Used as a controlled way to break a first integral.
SdeSystem with_drift_perturbation(const SdeSystem& sys, double eps);

}  // namespace gsde
