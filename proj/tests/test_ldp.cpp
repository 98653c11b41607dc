#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kawasaki/errors.hpp"
#include "kawasaki/ldp.hpp"

using namespace kawasaki;

namespace {

constexpr double kPi = std::numbers::pi;

Path sampled_path(const Grid& g, double T, int slices,
                  const std::function<double(double, std::span<const double>)>& rho) {
  Path p;
  p.grid = g;
  for (int k = 0; k < slices; ++k) {
    const double t = T * k / (slices - 1);
    Eigen::VectorXd v(g.cells());
    for (int c = 0; c < g.cells(); ++c) {
      const auto r = g.center(c);
      v[c] = rho(t, std::span<const double>(r.data(), g.d));
    }
    p.times.push_back(t);
    p.slices.push_back(v);
  }
  return p;
}

Coefficients constant_mobility(double s) {
  return {[s](double) { return s; }, [](double) { return 0.0; }, [](double) { return 1.0; }};
}

HydroSolution relax(int M, const FieldSpec& f, double T) {
  const DensityField init = DensityField::from_function(
      make_grid(1, M), [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * kPi * r[0]); });
  SolveOptions o;
  o.T = T;
  return solve_hydro(init, f, Coefficients::ssep(), o);
}

}  // namespace

TEST_CASE("weighted Poisson: 1-D mode and 2-D energy identity") {
  const Grid g = make_grid(1, 128);
  FaceField sigma = FaceField::zero(g);
  sigma.axis[0].setConstant(0.5);
  Eigen::VectorXd r(128);
  for (int c = 0; c < 128; ++c) r[c] = std::sin(2 * kPi * g.center(c)[0]);
  // -2 * 0.5 psi'' = sin  =>  psi = sin / (4 pi^2)
  const EllipticSolution s = solve_weighted_poisson(g, sigma, r);
  for (int c = 0; c < 128; c += 17) {
    CHECK(s.psi[c] == doctest::Approx(r[c] / (4 * kPi * kPi)).epsilon(1e-3));
  }
  CHECK(s.residual < 1e-10);
  CHECK(std::abs(s.psi.mean()) < 1e-14);

  const Grid g2 = make_grid(2, 32);
  FaceField s2 = FaceField::zero(g2);
  Eigen::VectorXd r2(g2.cells());
  for (int c = 0; c < g2.cells(); ++c) {
    const auto x = g2.center(c);
    s2.axis[0][c] = 0.2 + 0.1 * std::cos(2 * kPi * x[1]);
    s2.axis[1][c] = 0.25;
    r2[c] = std::cos(2 * kPi * x[0]) + std::sin(4 * kPi * x[1]);
  }
  const EllipticSolution e2 = solve_weighted_poisson(g2, s2, r2, 1e-12);
  CHECK(e2.residual < 1e-8);
  CHECK(e2.iterations > 0);
  // <psi, -2 div(sigma grad psi)> = 2 <grad psi, sigma grad psi>
  CHECK(0.5 * e2.psi.dot(r2) * g2.cell_volume() == doctest::Approx(e2.energy).epsilon(1e-8));
  const EllipticSolution warm = solve_weighted_poisson(g2, s2, r2, 1e-12, &e2.psi);
  CHECK(warm.iterations <= 2);
}

TEST_CASE("rate functional: quadrature oracle with constant mobility") {
  // pi = 1/2 + 0.1 (1 + t) sin(2 pi x), E = 0, sigma = 1/4, D = 1 gives
  // r = A(t) sin, A = 0.1 (1 + 4 pi^2 (1 + t)), slice value A^2 / (8 pi^2)
  const Grid g = make_grid(1, 256);
  const double T = 0.1;
  const Path p = sampled_path(g, T, 101, [](double t, std::span<const double> r) {
    return 0.5 + 0.1 * (1 + t) * std::sin(2 * kPi * r[0]);
  });
  const RateEval e = rate_functional(p, FieldSpec::zero(1), constant_mobility(0.25));
  REQUIRE(e.finite());
  auto A = [](double t) { return 0.1 * (1 + 4 * kPi * kPi * (1 + t)); };
  // Simpson on the exact quadratic-in-t integrand
  const double oracle = T / 6 * (A(0) * A(0) + 4 * A(T / 2) * A(T / 2) + A(T) * A(T)) / (8 * kPi * kPi);
  CHECK(e.value == doctest::Approx(oracle).epsilon(1e-3));
  for (std::size_t k = 0; k < e.slice_values.size(); ++k) {
    CHECK(e.slice_values[k] == doctest::Approx(A(e.times[k]) * A(e.times[k]) / (8 * kPi * kPi)).epsilon(1e-3));
  }
  CHECK(e.to_json().find("\"value\"") != std::string::npos);
}

TEST_CASE("rate functional: hydrodynamic paths cost (almost) nothing") {
  const std::array<double, 1> e{1.0};
  const FieldSpec f = FieldSpec::constant(e);
  const double i64 = rate_functional(relax(64, f, 0.05).path, f, Coefficients::ssep()).value;
  const double i128 = rate_functional(relax(128, f, 0.05).path, f, Coefficients::ssep()).value;
  CHECK(i64 < 1e-4);
  CHECK(i128 < i64 / 2);
}

TEST_CASE("rate functional sentinels") {
  const Grid g = make_grid(1, 32);
  const Path leaky = sampled_path(g, 0.1, 5, [](double t, std::span<const double> r) {
    return 0.4 + t + 0.1 * std::sin(2 * kPi * r[0]);
  });
  const RateEval a = rate_functional(leaky, FieldSpec::zero(1), Coefficients::ssep());
  CHECK_FALSE(a.finite());
  CHECK_FALSE(a.mass_conserving);

  const Path flat = sampled_path(g, 0.1, 5, [](double, std::span<const double>) { return 0.3; });
  const DensityField other = DensityField::constant(g, 0.4);
  RateOptions o;
  o.gamma = &other;
  CHECK_FALSE(rate_functional(flat, FieldSpec::zero(1), Coefficients::ssep(), o).finite());
  const DensityField same = DensityField::constant(g, 0.3);
  o.gamma = &same;
  CHECK(rate_functional(flat, FieldSpec::zero(1), Coefficients::ssep(), o).value == doctest::Approx(0.0));

  // a frozen empty region cannot move mass
  const Path stuck = sampled_path(g, 0.1, 5, [](double t, std::span<const double> r) {
    return r[0] < 0.5 ? 0.0 : 0.5 + 0.1 * t * std::sin(4 * kPi * r[0]);
  });
  CHECK_FALSE(rate_functional(stuck, FieldSpec::zero(1), Coefficients::ssep()).finite());
}

TEST_CASE("property: rate functional is nonnegative and dominates its dual bound") {
  const Grid g = make_grid(1, 64);
  for (double amp : {0.05, 0.2}) {
    for (double E : {0.0, 2.0}) {
      const std::array<double, 1> e{E};
      const FieldSpec f = FieldSpec::constant(e);
      const Path p = sampled_path(g, 0.05, 21, [amp](double t, std::span<const double> r) {
        return 0.5 + amp * std::cos(2 * kPi * (r[0] - 3 * t)) * (1 - 4 * t);
      });
      const double I = rate_functional(p, f, Coefficients::ssep()).value;
      const double dual = rate_functional_dual(p, f, Coefficients::ssep(), 4);
      CHECK(I >= 0.0);
      CHECK(dual >= 0.0);
      CHECK(dual <= I * (1 + 1e-6) + 1e-12);
      CHECK(dual >= 0.5 * I);
    }
  }
}

TEST_CASE("quasi-potential: relative entropy oracle") {
  const ThermoTable free(Interaction::zero());
  const FieldSpec f = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const Grid g = make_grid(1, 128);
  const DensityField gamma = stationary_profile(0.5, f, free, g);
  CHECK(quasi_potential(gamma, 0.5, f, free) == doctest::Approx(0.0));
  Eigen::VectorXd v = gamma.values();
  for (int c = 0; c < 128; ++c) v[c] += 0.1 * std::sin(2 * kPi * g.center(c)[0]);
  const DensityField rho(g, v);
  double oracle = 0.0;
  for (int c = 0; c < 128; ++c) {
    const double p = rho[c], q = gamma[c];
    oracle += (p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q))) / 128;
  }
  CHECK(quasi_potential(rho, 0.5, f, free) == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(quasi_potential(rho, gamma, free) == doctest::Approx(oracle).epsilon(1e-8));
  // convex along the segment to gamma
  const DensityField mid(g, 0.5 * (v + gamma.values()));
  CHECK(quasi_potential(mid, gamma, free) <= 0.5 * quasi_potential(rho, gamma, free));
  CHECK(quasi_potential(DensityField::constant(g, 0.6), 0.5, f, free) == kInfinity);
}

TEST_CASE("energy Q of a frozen sine profile") {
  const Grid g = make_grid(1, 256);
  const Path p = sampled_path(g, 0.2, 3, [](double, std::span<const double> r) {
    return 0.5 + 0.1 * std::sin(2 * kPi * r[0]);
  });
  // T * int (0.2 pi cos)^2 = 0.2 * 0.02 pi^2
  CHECK(energy_Q(p) == doctest::Approx(0.2 * 0.02 * kPi * kPi).epsilon(1e-3));
}

TEST_CASE("duality, Lyapunov and orthogonality identities on a relaxing path") {
  const ThermoTable free(Interaction::zero());
  const FieldSpec f = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  auto defects = [&](int M) {
    const Grid g = make_grid(1, M);
    const DensityField gamma = stationary_profile(0.5, f, free, g);
    const HydroSolution h = relax(M, f, 0.05);
    const DualityReport d = duality_defect(h.path, f, Coefficients::ssep(), free, gamma);
    const LyapunovSeries l = lyapunov_series(h.path, f, Coefficients::ssep(), free, gamma);
    CHECK(l.max_increase <= 1e-12);
    CHECK(d.F_end < d.F_start);
    return std::pair{d.defect, l.max_defect};
  };
  const auto [d1, l1] = defects(64);
  const auto [d2, l2] = defects(128);
  CHECK(d1 < 1e-4);
  CHECK(d2 < d1 / 3);
  CHECK(l2 < l1 / 3);

  const Grid g = make_grid(1, 256);
  const DensityField gamma = stationary_profile(0.5, f, free, g);
  const DensityField rho = DensityField::from_function(
      g, [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * kPi * r[0]); });
  CHECK(std::abs(orthogonality_defect(rho, f, Coefficients::ssep(), free, gamma)) < 1e-3);
}

TEST_CASE("exit path: value matches the quasi-potential") {
  const ThermoTable free(Interaction::zero());
  const FieldSpec f = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const Grid g = make_grid(1, 64);
  const DensityField gamma = stationary_profile(0.5, f, free, g);
  Eigen::VectorXd v = gamma.values();
  for (int c = 0; c < 64; ++c) v[c] += 0.1 * std::sin(2 * kPi * g.center(c)[0]);
  const ExitPlan plan = optimal_exit_path(DensityField(g, v), 0.5, f, Coefficients::ssep(), free);
  CHECK(plan.rate.finite());
  CHECK(plan.relative_gap < 0.02);
  CHECK(plan.path.slices.back() == v);
  CHECK(plan.to_json().find("quasi_potential") != std::string::npos);
  const ExitPlan trivial = optimal_exit_path(gamma, 0.5, f, Coefficients::ssep(), free);
  CHECK(trivial.quasi_potential == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(trivial.rate.value == doctest::Approx(0.0));
}

TEST_CASE("controlled field steers the hydrodynamics onto the target path") {
  const Grid g = make_grid(1, 64);
  const double T = 0.02;
  const Path target = sampled_path(g, T, 41, [](double t, std::span<const double> r) {
    return 0.5 + 0.1 * (1 + 10 * t) * std::sin(2 * kPi * r[0]);
  });
  const std::array<double, 1> e{1.0};
  const FieldSpec f = FieldSpec::constant(e);
  const ControlledField ctl = controlled_field(target, f, Coefficients::ssep());
  CHECK(ctl.faces.size() == target.times.size());
  CHECK(ctl.eval.finite());
  SolveOptions o;
  o.T = T;
  o.drift_bound = controlled_drift_bound(ctl);
  CHECK(o.drift_bound > 0.0);
  const HydroSolution s =
      solve_hydro(target.at(0), f, Coefficients::ssep(), o, controlled_drift(ctl));
  CHECK(l1_distance(g, s.path.slices.back(), target.slices.back()) < 1e-4);
  // without control the endpoint is far away
  const HydroSolution free_run = solve_hydro(target.at(0), f, Coefficients::ssep(), o);
  CHECK(l1_distance(g, free_run.path.slices.back(), target.slices.back()) > 1e-2);

  const Torus torus(1, 128);
  const auto sites = controlled_site_potential(ctl, torus, 4);
  // site 2x and 2x+1 straddle cell x: their mean is close to the cell value
  for (int c : {0, 17, 40}) {
    const double mean = 0.5 * (sites->value(T, 2 * c) + sites->value(T, 2 * c + 1));
    CHECK(mean == doctest::Approx(ctl.potential.back()[c]).epsilon(1e-2));
  }
}
