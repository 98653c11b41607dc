#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kawasaki/dynamics.hpp"
#include "kawasaki/rng.hpp"

using namespace kawasaki;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> potential_at_sites(const Torus& t, const FieldSpec& f) {
  std::vector<double> u;
  for (int x = 0; x < t.num_sites(); ++x) {
    const Vec3 r = site_position(t, x);
    u.push_back(f.U(std::span<const double>(r.data(), t.dim())));
  }
  return u;
}

Configuration random_config(int sites, Rng& rng) {
  Configuration c(sites);
  for (int x = 0; x < sites; ++x) c.set(x, rng.bernoulli(0.5));
  return c;
}

double max_uniform_deviation(const RateModel& m, int K) {
  const StationaryResult st = stationary_exact(generator_matrix(m, K));
  const double u = 1.0 / static_cast<double>(st.distribution.size());
  return (st.distribution.array() - u).abs().maxCoeff();
}

}  // namespace

TEST_CASE("witness sets") {
  const Torus line(1, 10);
  CHECK(witness_sites(line, Bond{3, 0}, 1) == std::vector<int>{2, 5});
  CHECK(witness_sites(line, Bond{3, 0}, 2).size() == 4);
  const Torus plane(2, 6);
  CHECK(witness_sites(plane, Bond{0, 0}, 1).size() == 6);
  CHECK(witness_sites(plane, Bond{0, 0}, 0).empty());
}

TEST_CASE("field work is antisymmetric and exact for potentials") {
  const Torus t(1, 12);
  const FieldSpec f =
      FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const auto U = potential_at_sites(t, f);
  for (const Bond& b : t.bonds()) {
    const int x = t.head(b), y = t.tail(b);
    CHECK(field_work(f, t, b) == doctest::Approx(U[x] - U[y]).epsilon(1e-13));
    CHECK(field_work(f, t, y, x) == doctest::Approx(-field_work(f, t, x, y)));
  }
  const std::array<double, 1> e{1.5};
  CHECK(field_work(FieldSpec::constant(e), t, Bond{0, 0}) == doctest::Approx(1.5 / 12));
  CHECK_THROWS(field_work(f, t, 0, 5));
}

TEST_CASE("property: symmetric rates are exchange invariant and positive") {
  Rng rng(5);
  const Torus t(2, 5);
  for (const RateFamily& fam : {RateFamily::heat_bath(), RateFamily::neighbor_weighted(0.5, 2)}) {
    for (double J : {0.0, 0.8}) {
      const Interaction inter = Interaction::nearest_neighbor(J);
      for (int trial = 0; trial < 10; ++trial) {
        const Configuration c = random_config(t.num_sites(), rng);
        for (const Bond& b : t.bonds()) {
          const double r = rate_symmetric(fam, inter, t, c, b);
          const Configuration e = exchange(t, c, b);
          CHECK(r > 0.0);
          // c0(eta) e^{-H(eta)} = c0(eta^b) e^{-H(eta^b)}
          const double lhs = r * std::exp(-hamiltonian(inter, t, c));
          const double rhs = rate_symmetric(fam, inter, t, e, b) * std::exp(-hamiltonian(inter, t, e));
          CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("generator rows sum to zero with off-diagonal N^2 c") {
  const std::array<double, 1> e{0.7};
  const RateModel m(Torus(1, 7), Interaction::nearest_neighbor(0.5),
                    RateFamily::neighbor_weighted(0.5), FieldSpec::constant(e));
  const SectorGenerator g = generator_matrix(m, 3);
  CHECK(g.states.size() == 35);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(35);
  CHECK((g.matrix * ones).cwiseAbs().maxCoeff() < 1e-10);
  // spot-check one transition
  const Configuration& s = g.states[0];
  const Torus& t = m.torus();
  for (int b = 0; b < t.num_bonds(); ++b) {
    const Configuration target = exchange(t, s, t.bond(b));
    if (target == s) continue;
    const auto it = std::find(g.states.begin(), g.states.end(), target);
    const int j = static_cast<int>(it - g.states.begin());
    CHECK(g.matrix.coeff(0, j) == doctest::Approx(49.0 * m.rate(s, b)));
  }
}

TEST_CASE("gradient case: uniform measure for every constant field") {
  for (double E : {0.0, 1.0, 3.0}) {
    const std::array<double, 1> e{E};
    const RateModel hb(Torus(1, 8), Interaction::zero(), RateFamily::heat_bath(),
                       FieldSpec::constant(e));
    CHECK(max_uniform_deviation(hb, 4) < 1e-12);
    // affine witness prefactor without interaction telescopes as well
    const RateModel nw(Torus(1, 8), Interaction::zero(), RateFamily::neighbor_weighted(0.5, 2),
                       FieldSpec::constant(e));
    CHECK(max_uniform_deviation(nw, 4) < 1e-12);
  }
  const std::array<double, 2> e2{1.0, -0.5};
  const RateModel two(Torus(2, 3), Interaction::zero(), RateFamily::heat_bath(),
                      FieldSpec::constant(e2));
  CHECK(max_uniform_deviation(two, 4) < 1e-12);
}

TEST_CASE("conservative field: detailed balance against the tilted Gibbs measure") {
  const Torus t(1, 8);
  const FieldSpec f = FieldSpec::conservative(
      1, FourierSeries(0.0).add_cos(0.4, {1, 0, 0}).add_sin(0.1, {3, 0, 0}));
  for (double J : {0.0, 0.5}) {
    const Interaction inter = Interaction::nearest_neighbor(J);
    for (const RateFamily& fam : {RateFamily::heat_bath(), RateFamily::neighbor_weighted(0.5)}) {
      const RateModel m(t, inter, fam, f);
      const SectorGenerator g = generator_matrix(m, 4);
      const Eigen::VectorXd gibbs = canonical_exact(inter, t, 4, potential_at_sites(t, f));
      CHECK(detailed_balance_residual(g, gibbs) < 1e-12);
      const StationaryResult st = stationary_exact(g);
      CHECK((st.distribution - gibbs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("interacting neighbour-weighted rates break Gibbs invariance") {
  const std::array<double, 1> e{1.0};
  const Torus t(1, 6);
  const Interaction inter = Interaction::nearest_neighbor(0.5);
  const RateModel m(t, inter, RateFamily::neighbor_weighted(0.5), FieldSpec::constant(e));
  const StationaryResult st = stationary_exact(generator_matrix(m, 3));
  CHECK(st.residual < 1e-12);
  const Eigen::VectorXd gibbs = canonical_exact(inter, t, 3);
  CHECK((st.distribution - gibbs).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("perturbed rates are reversible for H plus a potential field") {
  // c^{E,H} with E = -grad U is reversible w.r.t. exp{-H^U + sum_x H(t,x) eta_x}
  const Torus t(1, 8);
  const FieldSpec f = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const TimePotential H = [](double time, std::span<const double> r) {
    return (0.2 + time) * std::sin(2 * kPi * r[0]);
  };
  const Interaction inter = Interaction::nearest_neighbor(0.3);
  const double time = 0.4;
  const BondRate rate = [&](const Configuration& c, int b) {
    return rate_perturbed(RateFamily::heat_bath(), inter, f, H, t, c, t.bond(b), time);
  };
  const SectorGenerator g = generator_matrix(t, 4, rate);
  std::vector<double> U = potential_at_sites(t, f);
  for (int x = 0; x < 8; ++x) {
    const Vec3 r = site_position(t, x);
    U[x] -= H(time, std::span<const double>(r.data(), 1));
  }
  CHECK(detailed_balance_residual(g, canonical_exact(inter, t, 4, U)) < 1e-12);
}

TEST_CASE("rate model agrees with the free functions and bounds thinning") {
  Rng rng(8);
  const Torus t(2, 4);
  const std::array<double, 2> e{0.5, 1.0};
  RateModel m(t, Interaction::nearest_neighbor(0.4), RateFamily::neighbor_weighted(0.3),
              FieldSpec::constant(e));
  std::vector<Eigen::VectorXd> vals = {Eigen::VectorXd::Zero(16), Eigen::VectorXd::Zero(16)};
  for (int x = 0; x < 16; ++x) vals[1][x] = 0.1 * (x % 3);
  m.set_perturbation(std::make_shared<SampledSitePotential>(t, std::vector<double>{0.0, 1.0}, vals));
  CHECK(m.perturbation()->max_bond_jump() == doctest::Approx(0.2));
  CHECK(m.thinning_factor() == doctest::Approx(std::exp(0.1)));
  for (int trial = 0; trial < 10; ++trial) {
    const Configuration c = random_config(16, rng);
    for (int b = 0; b < t.num_bonds(); ++b) {
      CHECK(m.rate(c, b) == doctest::Approx(rate_asymmetric(m.family(), m.interaction(),
                                                            m.field(), t, c, t.bond(b))));
      CHECK(m.symmetric(c, b) ==
            doctest::Approx(rate_symmetric(m.family(), m.interaction(), t, c, t.bond(b))));
      for (double time : {0.0, 0.5, 2.0}) {
        CHECK(m.rate_at(c, b, time) <= m.rate(c, b) * m.thinning_factor() * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("property: dependency lists cover every rate that can change") {
  Rng rng(9);
  const Torus t(2, 5);
  const RateModel m(t, Interaction::nearest_neighbor(0.5), RateFamily::neighbor_weighted(0.5, 2),
                    FieldSpec::zero(2));
  for (int trial = 0; trial < 5; ++trial) {
    const Configuration c = random_config(t.num_sites(), rng);
    for (int x = 0; x < t.num_sites(); ++x) {
      Configuration flipped = c;
      flipped.set(x, !c[x]);
      const auto deps = m.dependents(x);
      for (int b = 0; b < t.num_bonds(); ++b) {
        if (m.rate(c, b) != m.rate(flipped, b)) {
          CHECK(std::find(deps.begin(), deps.end(), b) != deps.end());
        }
      }
    }
  }
}

TEST_CASE("sampled potentials interpolate linearly and clamp") {
  const Torus t(1, 4);
  std::vector<Eigen::VectorXd> v = {Eigen::VectorXd::Constant(4, 1.0),
                                    Eigen::VectorXd::Constant(4, 3.0)};
  const SampledSitePotential p(t, {0.0, 2.0}, v);
  CHECK(p.value(1.0, 2) == doctest::Approx(2.0));
  CHECK(p.value(-1.0, 0) == doctest::Approx(1.0));
  CHECK(p.value(5.0, 0) == doctest::Approx(3.0));
  CHECK_THROWS(SampledSitePotential(t, {0.0}, v));
}
