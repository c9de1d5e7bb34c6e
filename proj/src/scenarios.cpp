#include "gsde/scenarios.hpp"

#include <cmath>

#include "gsde/rng.hpp"

namespace gsde {

namespace {

constexpr double kPi = 3.14159265358979323846;

ScalarField radius_squared() {
  ScalarField u(2, [](double, const Vec& x) { return x[0] * x[0] + x[1] * x[1]; });
  u.with_gradient([](double, const Vec& x) { return Vec(2.0 * x); })
      .with_hessian([](double, const Vec& x) {
        return Mat(2.0 * Mat::Identity(x.size(), x.size()));
      })
      .with_time_derivative([](double, const Vec&) { return 0.0; });
  return u;
}

JumpMeasure uniform_mark_measure(double intensity, double lo, double hi, int grid_points) {
  JumpMeasure measure;
  measure.intensity = intensity;
  measure.mark_dim = 1;
  measure.sampler = [lo, hi](std::mt19937_64& gen) {
    return vec1(lo + (hi - lo) * rng::uniform01(gen));
  };
  for (int q = 0; q < grid_points; ++q)
    measure.mark_grid.push_back(
        vec1(lo + (hi - lo) * static_cast<double>(q) / (grid_points - 1)));
  return measure;
}

// Drift -s^2/2 x and one Wiener column s Q x with Q the quarter-turn matrix;
// the squared radius is conserved because Q is skew and Q^2 = -I.
void rotation_core(Scenario& sc, double s) {
  const double half_s2 = 0.5 * s * s;
  VectorField a(2, 2, [half_s2](double, const Vec& x) { return Vec(-half_s2 * x); });
  a.with_jacobian([half_s2](double, const Vec& x) {
    return Mat(-half_s2 * Mat::Identity(x.size(), x.size()));
  });
  MatrixField b(2, 2, 1, [s](double, const Vec& x) {
    Mat v(2, 1);
    v(0, 0) = -s * x[1];
    v(1, 0) = s * x[0];
    return v;
  });
  b.with_dx([s](double, const Vec&) {
    std::vector<Mat> d(2, Mat::Zero(2, 1));
    d[0](1, 0) = s;
    d[1](0, 0) = -s;
    return d;
  });
  sc.system.n = 2;
  sc.system.m = 1;
  sc.system.a = std::move(a);
  sc.system.b = std::move(b);
  sc.system.g = zero_jump(2);
  sc.system.measure = no_jumps();
  sc.system.time_invariant = true;
  sc.x0 = vec2(0.8, 0.4);
  sc.has_candidate = true;
  sc.candidate = radius_squared();
  sc.default_grid = GridSpec(vec2(-3.0, -3.0), vec2(3.0, 3.0), {96, 96});
  sc.default_T = 0.25;
  sc.default_h = 2.5e-4;
  sc.kernel_seeds.push_back({vec2(0.0, 0.0), 0.8});
}

// Smooth field dynamics used in composition studies: drift 0.3 x1, one
// Wiener loading 0.2 x2, jump response 0.1 gamma x2.
void attach_composition_field(Scenario& sc) {
  VectorField Pi(2, 1, [](double, const Vec& x) { return vec1(0.3 * x[0]); });
  Pi.with_jacobian([](double, const Vec&) {
    Mat j(1, 2);
    j(0, 0) = 0.3;
    j(0, 1) = 0.0;
    return j;
  });
  MatrixField D(2, 1, 1, [](double, const Vec& x) {
    Mat v(1, 1);
    v(0, 0) = 0.2 * x[1];
    return v;
  });
  D.with_dx([](double, const Vec&) {
    std::vector<Mat> d(2, Mat::Zero(1, 1));
    d[1](0, 0) = 0.2;
    return d;
  });
  JumpField G(2, 1, 1, [](double, const Vec& x, const Vec& mark) {
    return vec1(0.1 * mark[0] * x[1]);
  });
  G.with_dx([](double, const Vec&, const Vec& mark) {
    Mat d(1, 2);
    d(0, 0) = 0.0;
    d(0, 1) = 0.1 * mark[0];
    return d;
  });
  sc.has_field = true;
  sc.field = make_field_system(1, 2, 1, std::move(Pi), std::move(D), std::move(G), true);
  sc.field_init = [](const Vec& x) { return vec1(std::sin(x[0]) * std::cos(x[1])); };
  sc.field_grid = GridSpec(vec2(-2.4, -2.4), vec2(2.4, 2.4), {120, 120});
}

Scenario zero_dynamics() {
  Scenario sc;
  sc.name = "zero-dynamics";
  sc.description = "frozen state: a = b = g = 0, candidate |x|^2";
  sc.system = make_system(2, 1, zero_drift(2), zero_diffusion(2, 1), zero_jump(2),
                          no_jumps(), true);
  sc.x0 = vec2(0.8, 0.4);
  sc.has_candidate = true;
  sc.candidate = radius_squared();
  sc.default_grid = GridSpec(vec2(-2.0, -2.0), vec2(2.0, 2.0), {64, 64});
  sc.default_T = 1.0;
  sc.default_h = 1e-2;
  sc.kernel_seeds.push_back({vec2(0.0, 0.0), 0.6});
  return sc;
}

Scenario pure_translation() {
  Scenario sc;
  sc.name = "pure-translation";
  sc.description = "1D constant drift 0.5, no noise; candidate x - 0.5 t";
  VectorField a(1, 1, [](double, const Vec&) { return vec1(0.5); });
  a.with_jacobian([](double, const Vec&) { return Mat(Mat::Zero(1, 1)); });
  sc.system = make_system(1, 1, std::move(a), zero_diffusion(1, 1), zero_jump(1),
                          no_jumps(), true);
  sc.x0 = vec1(0.2);
  sc.has_candidate = true;
  ScalarField u(1, [](double t, const Vec& x) { return x[0] - 0.5 * t; });
  u.with_gradient([](double, const Vec&) { return vec1(1.0); })
      .with_hessian([](double, const Vec&) { return Mat(Mat::Zero(1, 1)); })
      .with_time_derivative([](double, const Vec&) { return -0.5; });
  sc.candidate = std::move(u);
  sc.default_grid = GridSpec(vec1(-4.0), vec1(4.0), {256});
  sc.default_T = 1.0;
  sc.default_h = 0.0125;  // 0.4 * spacing of the default grid
  sc.kernel_seeds.push_back({vec1(-0.5), 0.5});
  sc.kernel_seeds.push_back({vec1(0.0), 0.6});
  return sc;
}

Scenario harmonic_oscillator() {
  Scenario sc;
  sc.name = "harmonic-oscillator";
  sc.description = "deterministic rotation a = (x2, -x1); candidate |x|^2";
  VectorField a(2, 2, [](double, const Vec& x) { return vec2(x[1], -x[0]); });
  a.with_jacobian([](double, const Vec&) {
    Mat j(2, 2);
    j << 0.0, 1.0, -1.0, 0.0;
    return j;
  });
  sc.system = make_system(2, 1, std::move(a), zero_diffusion(2, 1), zero_jump(2),
                          no_jumps(), true);
  sc.x0 = vec2(1.0, 0.0);
  sc.has_candidate = true;
  sc.candidate = radius_squared();
  sc.default_grid = GridSpec(vec2(-2.0, -2.0), vec2(2.0, 2.0), {64, 64});
  sc.default_T = 1.0;
  sc.default_h = 1e-3;
  sc.kernel_seeds.push_back({vec2(1.0, 0.0), 0.4});
  return sc;
}

Scenario rotation_diffusion() {
  Scenario sc;
  sc.name = "rotation-diffusion";
  sc.description = "planar rotation with multiplicative radial-free noise; candidate |x|^2";
  rotation_core(sc, 0.3);
  attach_composition_field(sc);
  return sc;
}

Scenario rotation_jump() {
  Scenario sc;
  sc.name = "rotation-jump";
  sc.description =
      "rotation-diffusion plus Poisson rotations by a uniform angle; candidate |x|^2";
  rotation_core(sc, 0.3);
  JumpField g(2, 2, 1, [](double, const Vec& x, const Vec& mark) {
    const double c = std::cos(mark[0]);
    const double s = std::sin(mark[0]);
    return vec2((c - 1.0) * x[0] - s * x[1], s * x[0] + (c - 1.0) * x[1]);
  });
  g.with_dx([](double, const Vec&, const Vec& mark) {
    const double c = std::cos(mark[0]);
    const double s = std::sin(mark[0]);
    Mat d(2, 2);
    d << c - 1.0, -s, s, c - 1.0;
    return d;
  });
  sc.system.g = std::move(g);
  sc.system.measure = uniform_mark_measure(2.0, -0.25 * kPi, 0.25 * kPi, 16);
  sc.default_T = 1.0;
  sc.default_h = 1e-3;
  attach_composition_field(sc);
  return sc;
}

Scenario affine_jump_1d() {
  Scenario sc;
  sc.name = "affine-jump-1d";
  sc.description = "1D pure-jump scaling x -> (1 + gamma) x, gamma uniform in [0.2, 0.4]";
  JumpField g(1, 1, 1,
              [](double, const Vec& x, const Vec& mark) { return vec1(mark[0] * x[0]); });
  g.with_dx([](double, const Vec&, const Vec& mark) {
    Mat d(1, 1);
    d(0, 0) = mark[0];
    return d;
  });
  sc.system = make_system(1, 1, zero_drift(1), zero_diffusion(1, 1), std::move(g),
                          uniform_mark_measure(1.0, 0.2, 0.4, 5), true);
  sc.x0 = vec1(1.0);
  sc.default_grid = GridSpec(vec1(-2.0), vec1(6.0), {128});
  sc.default_T = 1.0;
  sc.default_h = 1e-2;
  sc.kernel_seeds.push_back({vec1(1.0), 0.5});
  return sc;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "zero-dynamics",     "pure-translation", "harmonic-oscillator",
      "rotation-diffusion", "rotation-jump",    "affine-jump-1d"};
  return names;
}

Scenario make_scenario(const std::string& name) {
  if (name == "zero-dynamics") return zero_dynamics();
  if (name == "pure-translation") return pure_translation();
  if (name == "harmonic-oscillator") return harmonic_oscillator();
  if (name == "rotation-diffusion") return rotation_diffusion();
  if (name == "rotation-jump") return rotation_jump();
  if (name == "affine-jump-1d") return affine_jump_1d();
  throw InvalidDiscretization("unknown scenario: " + name);
}

GridDensity gaussian_density(const GridSpec& grid, const Vec& center, double sigma) {
  return make_grid_density(
      grid,
      [&center, sigma](const Vec& x) {
        return std::exp(-(x - center).squaredNorm() / (2.0 * sigma * sigma));
      },
      true);
}

SdeSystem with_drift_perturbation(const SdeSystem& sys, double eps) {
  SdeSystem out = sys;
  const VectorField base = sys.a;
  VectorField a(base.dim_in(), base.dim_out(),
                [base, eps](double t, const Vec& x) { return Vec(base(t, x) + eps * x); });
  a.with_jacobian([base, eps](double t, const Vec& x) {
    return Mat(base.jacobian(t, x) + eps * Mat::Identity(x.size(), x.size()));
  });
  out.a = std::move(a);
  return out;
}

}  // namespace gsde
