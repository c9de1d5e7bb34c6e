// Certification instruments for first-integral candidates: closed-form
// condition residuals, Monte Carlo constancy along paths, and grid evolution
// of the candidate field.

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gsde/errors.hpp"
#include "gsde/grid.hpp"
#include "gsde/integral_check.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"
#include "gsde/scenarios.hpp"

using gsde::Mat;
using gsde::Vec;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

gsde::GridSpec square_grid(double half, int cells) {
  return gsde::GridSpec(v2(-half, -half), v2(half, half), {cells, cells});
}

gsde::ScalarField radius_candidate() {
  gsde::ScalarField u(2, [](double, const Vec& x) { return x.squaredNorm(); });
  u.with_gradient([](double, const Vec& x) { return Vec(2.0 * x); })
      .with_hessian([](double, const Vec& x) {
        return Mat(2.0 * Mat::Identity(x.size(), x.size()));
      })
      .with_time_derivative([](double, const Vec&) { return 0.0; });
  return u;
}

// Unit-strength rotation family: drift -x/2 and one Wiener column Qx with Q
// the quarter-turn matrix. The squared radius is conserved exactly.
gsde::SdeSystem unit_rotation_system() {
  gsde::VectorField a(2, 2, [](double, const Vec& x) { return Vec(-0.5 * x); });
  a.with_jacobian([](double, const Vec& x) {
    return Mat(-0.5 * Mat::Identity(x.size(), x.size()));
  });
  gsde::MatrixField b(2, 2, 1, [](double, const Vec& x) {
    Mat v(2, 1);
    v(0, 0) = -x[1];
    v(1, 0) = x[0];
    return v;
  });
  b.with_dx([](double, const Vec&) {
    std::vector<Mat> d(2, Mat::Zero(2, 1));
    d[0](1, 0) = 1.0;
    d[1](0, 0) = -1.0;
    return d;
  });
  return gsde::make_system(2, 1, std::move(a), std::move(b), gsde::zero_jump(2),
                           gsde::no_jumps(), true);
}

const std::vector<double> kCheckTimes = {0.0, 0.25, 0.5, 1.0};

}  // namespace

TEST_CASE("conditions hold at machine precision for the rotation family") {
  const gsde::SdeSystem sys = unit_rotation_system();
  const gsde::ScalarField u = radius_candidate();
  const gsde::GridSpec grid = square_grid(2.0, 16);
  const gsde::ConditionReport rep =
      gsde::check_conditions(sys, u, grid, kCheckTimes, 1e-10);
  CHECK(rep.overall_pass);
  CHECK(rep.wiener.max <= 1e-12);
  CHECK(rep.drift.max <= 1e-12);
  CHECK(rep.jump.max == 0.0);
  CHECK(rep.nodes_failed == 0);
  CHECK(rep.nodes_evaluated ==
        static_cast<long>(kCheckTimes.size()) * grid.total_nodes());
}

TEST_CASE("jump condition sweeps the registered mark set") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-jump");
  const gsde::GridSpec grid = square_grid(2.0, 16);
  const gsde::ConditionReport rep =
      gsde::check_conditions(sc.system, sc.candidate, grid, kCheckTimes, 1e-10);
  CHECK(rep.overall_pass);
  CHECK(rep.jump.max <= 1e-12);
  CHECK(rep.jump.argmax_mark.size() == 1);

  gsde::CheckOptions opts;
  opts.use_mark_grid = false;
  opts.random_marks = 8;
  const gsde::ConditionReport sampled =
      gsde::check_conditions(sc.system, sc.candidate, grid, kCheckTimes, 1e-10, opts);
  CHECK(sampled.overall_pass);
}

TEST_CASE("a candidate aligned with the noise fails the Wiener condition") {
  gsde::MatrixField b(2, 2, 1, [](double, const Vec&) {
    Mat v(2, 1);
    v << 1.0, 0.0;
    return v;
  });
  b.with_dx([](double, const Vec&) {
    return std::vector<Mat>(2, Mat::Zero(2, 1));
  });
  const gsde::SdeSystem sys = gsde::make_system(
      2, 1, gsde::zero_drift(2), std::move(b), gsde::zero_jump(2), gsde::no_jumps(), true);

  gsde::ScalarField u(2, [](double, const Vec& x) { return x[0]; });
  u.with_gradient([](double, const Vec&) { return v2(1.0, 0.0); })
      .with_hessian([](double, const Vec&) { return Mat(Mat::Zero(2, 2)); })
      .with_time_derivative([](double, const Vec&) { return 0.0; });

  const gsde::ConditionReport rep =
      gsde::check_conditions(sys, u, square_grid(2.0, 16), kCheckTimes, 1e-10);
  CHECK(!rep.overall_pass);
  CHECK(!rep.wiener.pass);
  CHECK(rep.wiener.max == 1.0);
  CHECK(rep.drift.pass);
  CHECK(rep.drift.max == 0.0);
}

TEST_CASE("drift residual is linear in a drift perturbation") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::GridSpec grid = square_grid(2.0, 16);
  const auto residual = [&](double eps) {
    const gsde::SdeSystem pert = gsde::with_drift_perturbation(sc.system, eps);
    return gsde::check_conditions(pert, sc.candidate, grid, kCheckTimes, 1e-10);
  };
  const gsde::ConditionReport r1 = residual(1e-3);
  const gsde::ConditionReport r2 = residual(1e-2);
  CHECK(!r2.overall_pass);
  CHECK(r2.wiener.pass);  // the noise alignment is untouched
  // max residual 2 eps |x|^2 at the grid corner |x|^2 = 8
  CHECK(r2.drift.max == doctest::Approx(0.16).epsilon(1e-6));
  CHECK(r2.drift.max == doctest::Approx(10.0 * r1.drift.max).epsilon(1e-6));
}

TEST_CASE("a candidate that cannot be evaluated on most nodes is rejected") {
  const gsde::Scenario sc = gsde::make_scenario("pure-translation");
  gsde::ScalarField u(1, [](double, const Vec& x) { return std::sqrt(x[0]); });
  const gsde::GridSpec grid(v1(-2.0), v1(2.0), {16});
  CHECK_THROWS_AS(
      (void)gsde::check_conditions(sc.system, u, grid, kCheckTimes, 1e-10),
      gsde::NumericalEvaluation);
}

TEST_CASE("constancy is exact for a constant candidate") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-jump");
  const gsde::ScalarField u(2, [](double, const Vec&) { return 7.0; });
  const gsde::ConstancyStats st = gsde::monte_carlo_constancy(
      sc.system, u, {sc.x0}, 11, 4, 0.5, {4e-3, 2e-3});
  CHECK(st.exact);
  CHECK(!st.plateau);
  for (const gsde::ConstancyLevel& lev : st.levels) CHECK(lev.mean_sup == 0.0);
}

TEST_CASE("deviation scales at first order for a deterministic rotation") {
  const gsde::Scenario sc = gsde::make_scenario("harmonic-oscillator");
  const gsde::ConstancyStats st = gsde::monte_carlo_constancy(
      sc.system, sc.candidate, {sc.x0}, 12, 3, 1.0, {4e-3, 2e-3, 1e-3});
  REQUIRE(st.levels.size() == 3);
  CHECK(st.levels[0].mean_sup > st.levels[1].mean_sup);
  CHECK(st.levels[1].mean_sup > st.levels[2].mean_sup);
  CHECK(st.fitted_order == doctest::Approx(1.0).epsilon(0.2));
  CHECK(!st.exact);
  CHECK(!st.plateau);
}

TEST_CASE("the conserved radius stays within tolerance along jump paths") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-jump");
  const gsde::ConstancyStats st = gsde::monte_carlo_constancy(
      sc.system, sc.candidate, {sc.x0}, 2024, 40, 0.5, {4e-3, 2e-3, 1e-3});
  REQUIRE(st.levels.size() == 3);
  for (const gsde::ConstancyLevel& lev : st.levels) CHECK(lev.blowups == 0);
  CHECK(st.levels.back().mean_sup <= 0.05);
  CHECK(st.fitted_order >= 0.25);
  CHECK(!st.plateau);
  CHECK(!st.exact);
}

TEST_CASE("a perturbed drift produces a plateau at a positive deviation") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-jump");
  const gsde::SdeSystem pert = gsde::with_drift_perturbation(sc.system, 1e-2);
  const gsde::ConstancyStats st = gsde::monte_carlo_constancy(
      pert, sc.candidate, {sc.x0}, 2024, 40, 1.0, {4e-3, 2e-3, 1e-3});
  CHECK(st.plateau);
  CHECK(!st.exact);
  CHECK(st.levels.back().mean_sup >= 5e-3);
}

TEST_CASE("step ladders must be decreasing integer multiples") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  CHECK_THROWS_AS((void)gsde::monte_carlo_constancy(sc.system, sc.candidate, {sc.x0},
                                                    1, 2, 0.5, {1e-3, 2e-3}),
                  gsde::InvalidDiscretization);
  CHECK_THROWS_AS((void)gsde::monte_carlo_constancy(sc.system, sc.candidate, {sc.x0},
                                                    1, 2, 0.5, {4e-3, 2.5e-3}),
                  gsde::InvalidDiscretization);
}

TEST_CASE("zero dynamics leave the candidate field untouched") {
  const gsde::Scenario sc = gsde::make_scenario("zero-dynamics");
  const gsde::GridDensity u0 =
      gsde::gaussian_density(sc.default_grid, v2(0.0, 0.0), 0.6);
  const gsde::NoiseRealization noise =
      gsde::generate_noise({40, 0}, 0.2, 1e-2, sc.system.m, sc.system.measure);
  const gsde::KernelRunResult run = gsde::evolve_u_spde(sc.system, u0, noise);
  CHECK((run.snapshots.back().values - u0.values).abs().maxCoeff() == 0.0);
}

TEST_CASE("a conserved field evolved on the grid stays near its start") {
  for (const char* name : {"rotation-diffusion", "rotation-jump"}) {
    CAPTURE(name);
    const gsde::Scenario sc = gsde::make_scenario(name);
    const gsde::GridSpec grid = square_grid(3.0, 64);
    const gsde::GridDensity u0 = gsde::make_grid_density(
        grid, [](const Vec& x) { return x.squaredNorm(); }, false);
    const gsde::NoiseRealization noise =
        gsde::generate_noise({41, 0}, 0.25, 1e-3, sc.system.m, sc.system.measure);
    const gsde::KernelRunResult run = gsde::evolve_u_spde(sc.system, u0, noise);
    const double dev = (run.snapshots.back().values - u0.values).abs().maxCoeff();
    CHECK(dev <= 0.05);  // upwind bias at |a| dx plus interpolation at jumps
  }
}

TEST_CASE("grid transport matches the shifted profile and refines") {
  const gsde::Scenario sc = gsde::make_scenario("pure-translation");
  const auto profile = [](double x) { return 2.0 + std::sin(0.7 * x); };
  const double T = 1.0;

  const auto transport_error = [&](int cells) {
    const gsde::GridSpec grid(v1(-4.0), v1(4.0), {cells});
    const double dx = grid.spacing(0);
    const int steps = static_cast<int>(std::ceil(T / (0.4 * dx)));
    const gsde::NoiseRealization noise = gsde::generate_noise(
        {42, 0}, T, T / steps, sc.system.m, sc.system.measure);
    const gsde::GridDensity u0 = gsde::make_grid_density(
        grid, [&](const Vec& x) { return profile(x[0]); }, false);
    const gsde::KernelRunResult run = gsde::evolve_u_spde(sc.system, u0, noise);
    const Eigen::ArrayXd& final_u = run.snapshots.back().values;
    double err = 0.0;
    for (long f = 0; f < grid.total_nodes(); ++f) {
      const double x = grid.node_coord(f)[0];
      if (x < -3.0 || x > 3.5) continue;  // clear of the frozen boundaries
      err = std::max(err, std::abs(final_u[f] - profile(x - 0.5 * T)));
    }
    return err;
  };

  const double coarse = transport_error(128);
  const double fine = transport_error(256);
  CHECK(fine <= 0.05);
  CHECK(fine < coarse);
}

TEST_CASE("oversized steps are rejected before stepping") {
  const gsde::Scenario translation = gsde::make_scenario("pure-translation");
  const gsde::GridDensity u0 = gsde::gaussian_density(
      gsde::GridSpec(v1(-4.0), v1(4.0), {256}), v1(0.0), 0.5);
  const gsde::NoiseRealization coarse_noise = gsde::generate_noise(
      {43, 0}, 1.0, 0.1, 1, gsde::no_jumps());
  CHECK_THROWS_AS((void)gsde::evolve_u_spde(translation.system, u0, coarse_noise),
                  gsde::UnstableDiscretization);

  const gsde::Scenario rotation = gsde::make_scenario("rotation-diffusion");
  const gsde::GridDensity u0_2d =
      gsde::gaussian_density(square_grid(3.0, 96), v2(0.0, 0.0), 0.8);
  const gsde::NoiseRealization noise_2d = gsde::generate_noise(
      {44, 0}, 0.1, 1e-2, rotation.system.m, rotation.system.measure);
  CHECK_THROWS_AS((void)gsde::evolve_u_spde(rotation.system, u0_2d, noise_2d),
                  gsde::UnstableDiscretization);
}

TEST_CASE("a non-finite start is rejected") {
  const gsde::Scenario sc = gsde::make_scenario("zero-dynamics");
  gsde::GridDensity u0 = gsde::gaussian_density(sc.default_grid, v2(0.0, 0.0), 0.6);
  u0.values[0] = std::nan("");
  const gsde::NoiseRealization noise =
      gsde::generate_noise({45, 0}, 0.1, 1e-2, sc.system.m, sc.system.measure);
  CHECK_THROWS_AS((void)gsde::evolve_u_spde(sc.system, u0, noise),
                  gsde::NumericalEvaluation);
}
