// Random-field evolution, composition with trajectories, the pathwise
// composition formula and the density/field pairing integral.

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gsde/errors.hpp"
#include "gsde/grid.hpp"
#include "gsde/kernel.hpp"
#include "gsde/model.hpp"
#include "gsde/noise.hpp"
#include "gsde/scenarios.hpp"
#include "gsde/simulate.hpp"
#include "gsde/wentzell.hpp"

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

gsde::GridSpec box_grid(double half, int cells) {
  Vec lo(2), hi(2);
  lo << -half, -half;
  hi << half, half;
  return gsde::GridSpec(lo, hi, {cells, cells});
}

gsde::FieldSystem zero_field_system(int n0, int n, int m) {
  gsde::VectorField pi(n, n0, [n0](double, const Vec&) { return Vec(Vec::Zero(n0)); });
  gsde::MatrixField d(n, n0, m, [n0, m](double, const Vec&) {
    return Mat(Mat::Zero(n0, m));
  });
  gsde::JumpField g(n, n0, 1, [n0](double, const Vec&, const Vec&) {
    return Vec(Vec::Zero(n0));
  });
  return gsde::make_field_system(n0, n, m, pi, d, g, true);
}

}  // namespace

TEST_CASE("field with zero dynamics stays put") {
  const gsde::GridSpec grid = box_grid(2.0, 16);
  const gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  const gsde::RandomFieldState z0 = gsde::make_field_state(
      grid, 1, [](const Vec& x) { return v1(std::sin(x[0]) + x[1]); });
  const gsde::NoiseRealization noise = gsde::generate_noise({20, 0}, 1.0, 0.01, 1,
                                                            gsde::no_jumps());
  const gsde::FieldRunResult run = gsde::evolve_field(fs, z0, noise);
  CHECK((run.snapshots.back().values - z0.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a unit load integrates to z0 + t") {
  const gsde::GridSpec grid = box_grid(2.0, 16);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  fs.Pi = gsde::VectorField(2, 1, [](double, const Vec&) { return v1(1.0); });
  const gsde::RandomFieldState z0 =
      gsde::make_field_state(grid, 1, [](const Vec& x) { return v1(x[0] * x[1]); });
  const gsde::NoiseRealization noise = gsde::generate_noise({21, 0}, 1.0, 0.01, 1,
                                                            gsde::no_jumps());
  const gsde::FieldRunResult run = gsde::evolve_field(fs, z0, noise);
  const Mat expect = z0.values.array() + 1.0;
  CHECK((run.snapshots.back().values - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a unit Wiener load adds the Brownian path uniformly in x") {
  const gsde::GridSpec grid = box_grid(2.0, 16);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  fs.D = gsde::MatrixField(2, 1, 1, [](double, const Vec&) {
    return Mat(Mat::Ones(1, 1));
  });
  const gsde::NoiseRealization noise = gsde::generate_noise({22, 0}, 1.0, 0.01, 1,
                                                            gsde::no_jumps());
  const gsde::RandomFieldState z0 =
      gsde::make_field_state(grid, 1, [](const Vec& x) { return v1(x[0]); });
  const gsde::FieldRunResult run = gsde::evolve_field(fs, z0, noise);

  double w = 0.0;
  for (int i = 0; i < noise.increments.rows(); ++i) w += noise.increments(i, 0);
  const Mat expect = z0.values.array() + w;
  CHECK((run.snapshots.back().values - expect).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("composition with a static identity field returns the path") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::GridSpec grid = box_grid(2.4, 48);
  const gsde::RandomFieldState id_field =
      gsde::make_field_state(grid, 2, [](const Vec& x) { return x; });
  const gsde::NoiseRealization noise = gsde::generate_noise(
      {23, 0}, 0.25, 1e-3, sc.system.m, sc.system.measure);
  const gsde::Path p = gsde::integrate_path(sc.system, sc.x0, noise);
  for (std::size_t i = 0; i < p.times.size(); i += 50) {
    const Vec z = gsde::compose_direct(id_field, p.state_at(i));
    CHECK((z - Vec(p.state_at(i))).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("composition of a constant field is a constant series") {
  const gsde::GridSpec grid = box_grid(2.0, 16);
  const gsde::RandomFieldState c_field =
      gsde::make_field_state(grid, 1, [](const Vec&) { return v1(3.5); });
  for (double x : {-1.0, 0.0, 0.4, 1.3})
    CHECK(gsde::compose_direct(c_field, v2(x, -x))[0] ==
          doctest::Approx(3.5).epsilon(1e-13));
}

TEST_CASE("unit-load field composed with a path tracks z0(x(t)) + t") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::GridSpec grid = box_grid(2.4, 96);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  fs.Pi = gsde::VectorField(2, 1, [](double, const Vec&) { return v1(1.0); });
  const auto z0 = [](const Vec& x) { return v1(std::sin(x[0]) * std::cos(x[1])); };
  const gsde::RandomFieldState state0 = gsde::make_field_state(grid, 1, z0);

  const gsde::NoiseRealization noise = gsde::generate_noise(
      {24, 0}, 0.25, 1e-3, sc.system.m, sc.system.measure);
  gsde::FieldRunOptions fopts;
  fopts.snapshot_stride = 1;
  const gsde::FieldRunResult run = gsde::evolve_field(fs, state0, noise, fopts);
  const gsde::Path p = gsde::integrate_path(sc.system, sc.x0, noise);
  const Mat series = gsde::compose_direct(run, p);
  for (std::size_t i = 0; i < p.times.size(); i += 50) {
    const double expect = z0(p.state_at(i))[0] + p.times[i];
    CHECK(series(static_cast<Eigen::Index>(i), 0) ==
          doctest::Approx(expect).epsilon(5e-4));
  }
}

TEST_CASE("all-zero field system with constant start gives a flat comparison") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::GridSpec grid = box_grid(2.4, 48);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  const gsde::NoiseRealization noise = gsde::generate_noise(
      {25, 0}, 0.25, 1e-3, sc.system.m, sc.system.measure);
  const gsde::WentzellComparison cmp = gsde::run_wentzell_comparison(
      sc.system, fs, grid, [](const Vec&) { return v1(2.0); }, sc.x0, noise);
  CHECK(cmp.max_gap <= 1e-11);
  for (Eigen::Index i = 0; i < cmp.formula.rows(); ++i)
    CHECK(cmp.formula(i, 0) == doctest::Approx(2.0).epsilon(1e-11));
}

TEST_CASE("composition formula reduces to the plain change of variables") {
  // Field dz = df/dt dt with D = G = 0 and a jump-free state equation: the
  // composed increment must follow the classical formula for f(t, x(t)).
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::GridSpec grid = box_grid(2.4, 192);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  fs.Pi = gsde::VectorField(2, 1, [](double, const Vec& x) {
    return v1(0.5 * std::sin(x[0]) * std::cos(x[1]));
  });
  const auto z0 = [](const Vec& x) { return v1(std::sin(x[0]) * std::cos(x[1])); };

  gsde::ScalarField f(2, [](double t, const Vec& x) {
    return (1.0 + 0.5 * t) * std::sin(x[0]) * std::cos(x[1]);
  });

  const double h = 2e-3;
  const gsde::NoiseRealization noise = gsde::generate_noise(
      {26, 0}, 0.25, h, sc.system.m, sc.system.measure);
  const gsde::WentzellComparison cmp =
      gsde::run_wentzell_comparison(sc.system, fs, grid, z0, sc.x0, noise);

  const gsde::IncrementSeries ito =
      gsde::apply_generalized_ito(f, sc.system, cmp.path, noise);
  double cum = f(0.0, sc.x0);
  double worst = 0.0;
  for (std::size_t i = 0; i < ito.increments.size(); ++i) {
    cum += ito.increments[i];
    worst = std::max(worst, std::abs(cum - cmp.formula(static_cast<Eigen::Index>(i) + 1, 0)));
  }
  CHECK(worst <= 0.02);  // grid-sampled derivatives against analytic ones
}

TEST_CASE("comparison gap shrinks with the step along jump paths") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-jump");
  const double T = 0.5;
  const auto mean_gap = [&](double h_coarse, int n_paths) {
    double coarse_acc = 0.0, fine_acc = 0.0;
    for (int p = 0; p < n_paths; ++p) {
      const gsde::NoiseRealization fine = gsde::generate_noise(
          {27, static_cast<std::uint64_t>(p)}, T, h_coarse / 4.0, sc.system.m,
          sc.system.measure);
      const gsde::NoiseRealization coarse = gsde::refine_noise(h_coarse, fine);
      const gsde::WentzellComparison c1 = gsde::run_wentzell_comparison(
          sc.system, sc.field, sc.field_grid, sc.field_init, sc.x0, coarse);
      const gsde::WentzellComparison c2 = gsde::run_wentzell_comparison(
          sc.system, sc.field, sc.field_grid, sc.field_init, sc.x0, fine);
      const Eigen::Index lc = c1.formula.rows() - 1, lf = c2.formula.rows() - 1;
      coarse_acc += (c1.formula.row(lc) - c1.direct.row(lc)).cwiseAbs().maxCoeff();
      fine_acc += (c2.formula.row(lf) - c2.direct.row(lf)).cwiseAbs().maxCoeff();
    }
    return std::make_pair(coarse_acc / n_paths, fine_acc / n_paths);
  };
  const auto [coarse, fine] = mean_gap(4e-3, 10);
  CHECK(fine < coarse);
}

TEST_CASE("formula series alone matches the comparison output") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  const gsde::NoiseRealization noise = gsde::generate_noise(
      {28, 0}, 0.1, 1e-3, sc.system.m, sc.system.measure);
  const gsde::WentzellComparison cmp = gsde::run_wentzell_comparison(
      sc.system, sc.field, sc.field_grid, sc.field_init, sc.x0, noise);
  const gsde::WentzellSeries series = gsde::integrate_wentzell(
      sc.system, sc.field, sc.field_grid, sc.field_init, sc.x0, noise);
  CHECK((series.values - cmp.formula).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pairing integral: flat scalar field against a translating density") {
  const gsde::Scenario sc = gsde::make_scenario("pure-translation");
  const gsde::GridSpec grid = sc.default_grid;
  const int steps = 160;
  const double T = 1.0;
  const gsde::NoiseRealization noise = gsde::generate_noise(
      {29, 0}, T, T / steps, sc.system.m, sc.system.measure);

  const gsde::GridDensity rho0 = gsde::gaussian_density(grid, v1(-0.5), 0.5);
  gsde::KernelOptions kopts;
  kopts.snapshot_stride = steps / 4;
  const gsde::KernelRunResult kernel = gsde::evolve_kernel(sc.system, rho0, noise, kopts);

  gsde::FieldSystem fs = zero_field_system(1, 1, 1);
  const gsde::RandomFieldState z0 = gsde::make_field_state(
      grid, 1, [](const Vec& x) { return v1(std::sin(0.7 * x[0])); });
  gsde::FieldRunOptions fopts;
  fopts.snapshot_stride = steps / 4;
  const gsde::FieldRunResult field = gsde::evolve_field(fs, z0, noise, fopts);

  gsde::Proposition1Options popts;
  popts.n_samples = 16384;
  const gsde::Proposition1Result res =
      gsde::check_proposition1(sc.system, field, kernel, noise, popts);
  REQUIRE(res.times.size() >= 2);
  CHECK(res.residual.front() <= 0.02);   // only Monte Carlo error at t=0
  CHECK(res.max_residual <= 0.05);       // MC + first-order transport error
}

TEST_CASE("pairing integral tightens under coupled refinement") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  Vec lo(2), hi(2);
  lo << -3.0, -3.0;
  hi << 3.0, 3.0;

  const auto residual_at = [&](int cells, double h) {
    const gsde::GridSpec grid(lo, hi, {cells, cells});
    const double T = 0.25;
    const int steps = static_cast<int>(std::llround(T / h));
    const gsde::NoiseRealization noise =
        gsde::generate_noise({30, 0}, T, h, sc.system.m, sc.system.measure);
    const gsde::GridDensity rho0 = gsde::gaussian_density(grid, Vec::Zero(2), 0.8);
    gsde::KernelOptions kopts;
    kopts.snapshot_stride = steps;
    const gsde::KernelRunResult kernel =
        gsde::evolve_kernel(sc.system, rho0, noise, kopts);

    gsde::FieldSystem fs = zero_field_system(1, 2, 1);
    fs.D = gsde::MatrixField(2, 1, 1, [](double, const Vec& x) {
      Mat m(1, 1);
      m << 0.2 * x[1];
      return m;
    });
    const gsde::RandomFieldState z0 = gsde::make_field_state(
        grid, 1, [](const Vec& x) { return v1(std::sin(x[0]) * std::cos(x[1])); });
    gsde::FieldRunOptions fopts;
    fopts.snapshot_stride = steps;
    const gsde::FieldRunResult field = gsde::evolve_field(fs, z0, noise, fopts);

    gsde::Proposition1Options popts;
    popts.n_samples = 8192;
    const gsde::Proposition1Result res =
        gsde::check_proposition1(sc.system, field, kernel, noise, popts);
    return res.max_residual;
  };

  const double coarse = residual_at(48, 1e-3);
  const double fine = residual_at(96, 5e-4);
  CHECK(fine < coarse + 5e-3);  // systematic part shrinks; MC floor shared
}

TEST_CASE("degenerate pairing weights raise an estimate error") {
  const gsde::Scenario sc = gsde::make_scenario("rotation-diffusion");
  Vec lo(2), hi(2);
  lo << -3.0, -3.0;
  hi << 3.0, 3.0;
  const gsde::GridSpec grid(lo, hi, {48, 48});
  const double T = 0.01;
  const gsde::NoiseRealization noise =
      gsde::generate_noise({31, 0}, T, 1e-3, sc.system.m, sc.system.measure);
  const gsde::GridDensity rho0 = gsde::gaussian_density(grid, Vec::Zero(2), 0.05);
  const gsde::KernelRunResult kernel = gsde::evolve_kernel(sc.system, rho0, noise);
  gsde::FieldSystem fs = zero_field_system(1, 2, 1);
  const gsde::RandomFieldState z0 =
      gsde::make_field_state(grid, 1, [](const Vec&) { return v1(1.0); });
  const gsde::FieldRunResult field = gsde::evolve_field(fs, z0, noise);
  gsde::Proposition1Options popts;
  popts.n_samples = 256;
  CHECK_THROWS_AS(
      (void)gsde::check_proposition1(sc.system, field, kernel, noise, popts),
      gsde::IllConditionedEstimate);
}
