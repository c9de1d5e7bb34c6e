#pragma once

// Certification of first-integral candidates u(t;x) for a jump-diffusion
// system. Three complementary instruments:
//
//  * check_conditions: pointwise residuals of the closed-form criteria
//      C1: sum_i b_ik du/dx_i = 0 for every Wiener component k,
//      C2: du/dt + du/dx_i (a_i - 1/2 b_jk db_ik/dx_j) = 0,
//      C3: u(t,x) - u(t, x + g(t,x,gamma)) = 0 for every mark,
//    swept over a check grid, a time list and a mark set.
//  * monte_carlo_constancy: distribution of sup_t |u(t,x(t)) - u(0,x0)| over
//    simulated paths with coupled step refinement; a true integral shows a
//    plateau (no h-dependence beyond noise), a non-integral converges to a
//    positive deviation.
//  * evolve_u_spde: explicit stepping of the field equation du =
//    [-a_i du/dx_i + 1/2 b_ik b_jk d2u/dx_i dx_j + b_ik (db_jk/dx_i) du/dx_j] dt
//    - b_ik du/dx_i dw_k with jump replacement u(x) <- u(y(x)); an integral
//    evolved this way stays put up to scheme error.

#include <cstdint>
#include <vector>

#include "gsde/grid.hpp"
#include "gsde/kernel.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"

namespace gsde {

struct ConditionStats {
  double max = 0.0;
  double mean = 0.0;
  double argmax_time = 0.0;
  Vec argmax_point;
  Vec argmax_mark;  // only filled for the jump condition
  bool pass = false;
};

struct ConditionReport {
  ConditionStats wiener;  // C1
  ConditionStats drift;   // C2
  ConditionStats jump;    // C3
  bool overall_pass = false;
  double tolerance = 0.0;
  long nodes_evaluated = 0;
  long nodes_failed = 0;  // evaluation errors, tolerated up to 10%
};

struct CheckOptions {
  bool use_mark_grid = true;  // sweep measure.mark_grid; otherwise draw marks
  int random_marks = 8;
  std::uint64_t seed = 7;
};

/// Evaluates the three residual fields over check_grid x times (x marks for
/// the jump condition). Nodes whose evaluation throws are skipped and
/// counted; more than 10% failures raises NumericalEvaluation.
ConditionReport check_conditions(const SdeSystem& sys, const ScalarField& u,
                                 const GridSpec& check_grid, const std::vector<double>& times,
                                 double tol, const CheckOptions& opts = {});

struct ConstancyLevel {
  double h = 0.0;
  double mean_sup = 0.0;    // mean over paths of sup_t relative deviation
  double median_sup = 0.0;
  double max_sup = 0.0;
  int blowups = 0;  // diverged paths, excluded from the statistics
};

struct ConstancyStats {
  std::vector<ConstancyLevel> levels;  // one per step size, coarsest first
  double fitted_order = 0.0;           // log-log slope of mean_sup against h
  bool exact = false;                  // every deviation below 1e-14
  bool plateau = false;                // no h-improvement: fitted order < 0.15
};

/// Paths cycle through x0s; path p uses noise stream p of master_seed. Step
/// sizes must be decreasing, each an integer multiple of the last, so the
/// levels share one underlying realization per path.
ConstancyStats monte_carlo_constancy(const SdeSystem& sys, const ScalarField& u,
                                     const std::vector<Vec>& x0s, std::uint64_t master_seed,
                                     int n_paths, double T,
                                     const std::vector<double>& h_levels);

/// Explicit stepping of the candidate-field equation on u0's grid, reusing
/// the kernel solver's options, stability guards and snapshot conventions.
/// Jump replacement reads the pre-jump point without a volume factor; points
/// pulled from outside the grid keep their previous value.
KernelRunResult evolve_u_spde(const SdeSystem& sys, const GridDensity& u0,
                              const NoiseRealization& noise, const KernelOptions& opts = {});

}  // namespace gsde
