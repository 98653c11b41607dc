// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Thresholds are fixed; failures are reported, never relaxed.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kawasaki/checks.hpp"
#include "kawasaki/config.hpp"
#include "kawasaki/dynamics.hpp"
#include "kawasaki/experiments.hpp"
#include "kawasaki/gibbs.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/ldp.hpp"
#include "kawasaki/pde.hpp"
#include "kawasaki/transport.hpp"

using namespace kawasaki;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<double> positions(const Torus& torus, const FieldSpec& field) {
  std::vector<double> u;
  for (int x = 0; x < torus.num_sites(); ++x) {
    const Vec3 r = site_position(torus, x);
    u.push_back(field.U(std::span<const double>(r.data(), torus.dim())));
  }
  return u;
}

Outcome gradient_invariance() {
  double worst = 0.0;
  for (double E : {0.0, 1.0, 2.0}) {
    for (const auto& [N, K] : {std::pair{4, 2}, std::pair{6, 3}, std::pair{8, 4}}) {
      const std::array<double, 1> e{E};
      const RateModel model(Torus(1, N), Interaction::zero(), RateFamily::heat_bath(),
                            FieldSpec::constant(e));
      const StationaryResult st = stationary_exact(generator_matrix(model, K));
      const double u = 1.0 / static_cast<double>(st.distribution.size());
      worst = std::max(worst, (st.distribution.array() - u).abs().maxCoeff());
    }
  }
  return {worst <= 1e-10, "max deviation from uniform " + fmt(worst)};
}

Outcome conservative_reversibility() {
  const Torus torus(1, 8);
  const FieldSpec field =
      FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}).add_sin(0.2, {2, 0, 0}));
  double worst = 0.0;
  for (double J : {0.0, 0.5}) {
    const Interaction inter = J == 0.0 ? Interaction::zero() : Interaction::nearest_neighbor(J);
    const RateModel model(torus, inter, RateFamily::heat_bath(), field);
    const SectorGenerator gen = generator_matrix(model, 4);
    const Eigen::VectorXd gibbs = canonical_exact(inter, torus, 4, positions(torus, field));
    worst = std::max(worst, detailed_balance_residual(gen, gibbs));
  }
  return {worst <= 1e-12, "detailed-balance residual " + fmt(worst)};
}

// With zero interaction the witness prefactor is affine in the occupations and
// the current telescopes, so the non-gradient regime needs the interacting chain
// (interaction range 1 gives a nonempty witness set).
Outcome non_gradient_signature() {
  const std::array<double, 1> e{1.0};
  const Torus torus(1, 6);
  const Interaction inter = Interaction::nearest_neighbor(0.5);
  const RateModel model(torus, inter, RateFamily::neighbor_weighted(0.5),
                        FieldSpec::constant(e));
  const StationaryResult st = stationary_exact(generator_matrix(model, 3));
  const Eigen::VectorXd gibbs =
      canonical_exact(inter, torus, 3, std::vector<double>(torus.num_sites(), 0.0));
  const double dev = (st.distribution - gibbs).cwiseAbs().maxCoeff();
  return {dev > 1e-6, "deviation from canonical Gibbs " + fmt(dev)};
}

Outcome hydrodynamic_convergence() {
  ExperimentConfig c;
  c.model.d = 1;
  c.model.N = 256;
  c.field.E = {1.0};
  c.run.T = 0.1;
  c.run.observe = {0.1};
  c.run.trajectories = 200;
  c.run.seed = 20240601;
  c.run.initial = "0.5; 0.25*sin[1]";
  c.run.n_ladder = {64, 128, 256};
  c.numerics.M = 32;
  c.numerics.pde_M = 256;
  const auto rows = hydro_compare(c, 1);
  std::ostringstream os;
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "N=" << rows[i].N << ": " << fmt(rows[i].l1) << (i + 1 < rows.size() ? ", " : "");
    if (i > 0) decreasing = decreasing && rows[i].l1 < rows[i - 1].l1;
  }
  const double last = rows.back().l1;
  return {decreasing && last <= 0.03, "L1 " + os.str()};
}

Outcome mobility_oracle() {
  double worst_sigma = 0.0;
  double worst_gain = 0.0;
  for (int k : {1, 2}) {
    const MobilityResult m =
        mobility_variational(RateFamily::heat_bath(), Interaction::zero(), 0.3, k, 1);
    worst_sigma = std::max(worst_sigma, std::abs(m.sigma(0, 0) - 0.21));
    worst_gain = std::max(worst_gain, std::abs(m.improvement));
  }
  const Interaction inter = Interaction::nearest_neighbor(0.5);
  const ThermoTable thermo(inter);
  std::vector<MobilityResult> nw;
  for (int k : {0, 1, 2}) {
    nw.push_back(mobility_variational(RateFamily::neighbor_weighted(0.5), inter, 0.5, k, 1,
                                      &thermo));
  }
  auto min_gap = [](const Eigen::MatrixXd& hi, const Eigen::MatrixXd& lo) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hi - lo).eigenvalues().minCoeff();
  };
  auto max_gap = [](const Eigen::MatrixXd& hi, const Eigen::MatrixXd& lo) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hi - lo).eigenvalues().maxCoeff();
  };
  // sigma_0 is the f = 0 objective on the window of each k
  const bool ordered = min_gap(nw[1].sigma_f0, nw[1].sigma) >= -1e-12 &&
                       min_gap(nw[1].sigma, nw[2].sigma) >= -1e-12;
  const double drop1 = max_gap(nw[1].sigma_f0, nw[1].sigma);
  const double drop2 = max_gap(nw[2].sigma_f0, nw[2].sigma);
  const bool ok = worst_sigma <= 1e-12 && worst_gain < 1e-12 && ordered && drop1 >= 1e-6;
  return {ok, "|sigma(0.3)-0.21| " + fmt(worst_sigma) + ", SSEP gain " + fmt(worst_gain) +
                  ", non-gradient decrease k=1 " + fmt(drop1) + " (k=2 " + fmt(drop2) +
                  (ordered ? ", ordered)" : ", NOT ordered)")};
}

Outcome thermodynamics_oracle() {
  const ThermoTable free(Interaction::zero());
  const double oracle = 0.3 * std::log(0.6) + 0.7 * std::log(1.4);
  const double ferr = std::abs(free.excess(0.3, 0.5) - oracle);
  const double chierr = std::abs(compressibility(free, 0.5) - 0.25);
  double worst_c = 0.0;
  for (double J : {-0.5, -0.25, 0.0, 0.25, 0.5}) {
    const ThermoTable t(J == 0.0 ? Interaction::zero() : Interaction::nearest_neighbor(J));
    worst_c = std::max(worst_c, t.chi_bound_constant());
  }
  return {ferr <= 1e-6 && chierr <= 1e-8 && worst_c <= 4.0,
          "f err " + fmt(ferr) + ", chi err " + fmt(chierr) + ", C " + fmt(worst_c)};
}

double null_rate(int M) {
  const Grid g = make_grid(1, M);
  const std::array<double, 1> e{1.0};
  const FieldSpec field = FieldSpec::constant(e);
  const DensityField init = DensityField::from_function(
      g, [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * kPi * r[0]); });
  SolveOptions so;
  so.T = 0.1;
  const HydroSolution h = solve_hydro(init, field, Coefficients::ssep(), so);
  return rate_functional(h.path, field, Coefficients::ssep()).value;
}

Outcome rate_functional_response() {
  const double i64 = null_rate(64), i128 = null_rate(128), i256 = null_rate(256);
  const double order1 = std::log2(i64 / i128), order2 = std::log2(i128 / i256);
  const bool null_ok = i256 <= 1e-4 && order1 >= 1.0 && order2 >= 1.0;

  // Path driven by 2 grad H with H = 0.2 sin(2 pi r): its optimal potential is H.
  const Grid g = make_grid(1, 256);
  const std::array<double, 1> e{1.0};
  const FieldSpec field = FieldSpec::constant(e);
  const Coefficients co = Coefficients::ssep();
  Eigen::VectorXd h(g.cells());
  for (int c = 0; c < g.cells(); ++c) h[c] = 0.2 * std::sin(2 * kPi * g.center(c)[0]);
  const FaceField drift = gradient_faces(g, 2.0 * h);
  const DensityField init = DensityField::from_function(
      g, [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * kPi * r[0]); });
  SolveOptions so;
  so.T = 0.1;
  so.drift_bound = drift.axis[0].cwiseAbs().maxCoeff();
  const HydroSolution sol =
      solve_hydro(init, field, co, so, [drift](double, FaceField& add) { add += drift; });
  const RateEval eval = rate_functional(sol.path, field, co);
  // Oracle: int dt int sigma(pi) (dH/dr)^2 dr with the exact derivative at faces.
  const auto w = trapezoid_weights(sol.path.times);
  double expected = 0.0;
  for (int k = 0; k < sol.path.size(); ++k) {
    const FaceField s = face_mobility(g, sol.path.slices[k], co);
    double acc = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
      const double dh = 0.2 * 2 * kPi * std::cos(2 * kPi * (c + 1.0) / g.M);
      acc += s.axis[0][c] * dh * dh;
    }
    expected += w[k] * acc * g.dx();
  }
  const double rel = std::abs(eval.value - expected) / expected;
  return {null_ok && rel <= 0.01,
          "null I(M=256) " + fmt(i256) + ", orders " + fmt(order1) + "/" + fmt(order2) +
              ", controlled rel err " + fmt(rel)};
}

Outcome quasi_potential_identity() {
  const ThermoTable thermo(Interaction::zero());
  const Coefficients co = Coefficients::ssep();
  std::ostringstream os;
  bool ok = true;
  {
    const Grid g = make_grid(1, 256);
    const FieldSpec field = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
    const DensityField gamma = stationary_profile(0.5, field, thermo, g);
    const std::vector<std::function<double(double)>> bumps = {
        [](double r) { return 0.1 * std::sin(2 * kPi * r); },
        [](double r) { return 0.08 * std::cos(4 * kPi * r) - 0.05 * std::sin(6 * kPi * r); }};
    for (const auto& bump : bumps) {
      Eigen::VectorXd v = gamma.values();
      for (int c = 0; c < g.cells(); ++c) v[c] += bump(g.center(c)[0]);
      v.array() += 0.5 - v.mean();
      const ExitPlan plan = optimal_exit_path(DensityField(g, v), 0.5, field, co, thermo);
      ok = ok && plan.rate.finite() && plan.relative_gap <= 0.02;
      os << "1-D gap " << fmt(plan.relative_gap) << "; ";
    }
  }
  {
    const Grid g = make_grid(2, 64);
    FieldSpec base(2);
    base.set_potential(FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
    FieldSpec plus = base, minus = base;
    plus.set_stream_function(FourierSeries(0.0).add_sin(0.15, {1, 0, 0}));
    minus.set_stream_function(FourierSeries(0.0).add_sin(-0.15, {1, 0, 0}));
    // Away from rho = 1/2 the mobility is not stationary, so the
    // divergence-free drift transports the perturbation at first order.
    const double mass = 0.3;
    const DensityField gamma = stationary_profile(mass, base, thermo, g);
    Eigen::VectorXd v = gamma.values();
    for (int c = 0; c < g.cells(); ++c) {
      const auto r = g.center(c);
      v[c] += 0.1 * std::sin(2 * kPi * r[1]) * (1 + 0.5 * std::cos(2 * kPi * r[0]));
    }
    v.array() += mass - v.mean();
    const DensityField target(g, v);
    ExitOptions eo;
    eo.output_every = 4;
    const ExitPlan p = optimal_exit_path(target, mass, plus, co, thermo, eo);
    const ExitPlan m = optimal_exit_path(target, mass, minus, co, thermo, eo);
    const ExitPlan z = optimal_exit_path(target, mass, base, co, thermo, eo);
    const double spread =
        std::max({p.rate.value, m.rate.value, z.rate.value}) /
            std::min({p.rate.value, m.rate.value, z.rate.value}) - 1.0;
    // Compare the relaxation trajectories at matching times (same dt).
    const Path rp = time_reversed(p.path), rm = time_reversed(m.path);
    double path_l1 = 0.0;
    const int n = std::min(rp.size(), rm.size());
    for (int k = 0; k < n; ++k) {
      path_l1 = std::max(path_l1, l1_distance(g, rp.slices[k], rm.slices[k]));
    }
    const double gap = std::max({p.relative_gap, m.relative_gap, z.relative_gap});
    const bool ok2 = p.rate.finite() && m.rate.finite() && z.rate.finite() && spread <= 0.02 &&
                     gap <= 0.02 && path_l1 > 10 * eo.tolerance;
    ok = ok && ok2;
    os << "2-D value spread " << fmt(spread) << ", gap to F " << fmt(gap) << ", path L1 "
       << fmt(path_l1);
  }
  return {ok, os.str()};
}

struct IdentityDefects {
  double duality = 0.0;
  double lyapunov = 0.0;
};

IdentityDefects identity_defects(int M) {
  const Grid g = make_grid(1, M);
  const ThermoTable thermo(Interaction::zero());
  const Coefficients co = Coefficients::ssep();
  const FieldSpec field = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const DensityField gamma = stationary_profile(0.5, field, thermo, g);
  const DensityField init = DensityField::from_function(
      g, [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * kPi * r[0]); });
  SolveOptions so;
  so.T = 0.05;
  const HydroSolution h = solve_hydro(init, field, co, so);
  return {duality_defect(h.path, field, co, thermo, gamma).defect,
          lyapunov_series(h.path, field, co, thermo, gamma).max_defect};
}

Outcome duality_and_lyapunov() {
  const IdentityDefects a = identity_defects(64), b = identity_defects(128),
                        c = identity_defects(256);
  const bool ok = c.duality <= 1e-3 && c.lyapunov <= 1e-3 && a.duality / b.duality >= 3 &&
                  b.duality / c.duality >= 3 && a.lyapunov / b.lyapunov >= 3 &&
                  b.lyapunov / c.lyapunov >= 3;
  return {ok, "duality " + fmt(a.duality) + " -> " + fmt(b.duality) + " -> " + fmt(c.duality) +
                  "; lyapunov " + fmt(a.lyapunov) + " -> " + fmt(b.lyapunov) + " -> " +
                  fmt(c.lyapunov)};
}

Outcome microscopic_steering() {
  const int N = 256, M = 32, trajectories = 200;
  const double T = 0.1;
  const std::array<double, 1> e{1.0};
  const FieldSpec field = FieldSpec::constant(e);
  const Coefficients co = Coefficients::ssep();
  // Target fluctuation grown linearly out of the flat stationary state.
  const Grid g = make_grid(1, N);
  Path target;
  target.grid = g;
  const int slices = 201;
  for (int k = 0; k < slices; ++k) {
    const double t = T * k / (slices - 1);
    Eigen::VectorXd v(g.cells());
    for (int c = 0; c < g.cells(); ++c) v[c] = 0.5 + 2.5 * t * std::sin(2 * kPi * g.center(c)[0]);
    target.times.push_back(t);
    target.slices.push_back(v);
  }
  const ControlledField control = controlled_field(target, field, co);
  const Torus torus(1, N);
  RateModel model(torus, Interaction::zero(), RateFamily::heat_bath(), field);
  model.set_perturbation(controlled_site_potential(control, torus));
  const auto ens = run_ensemble(
      model,
      [&](Rng& rng) {
        return sample_product_configuration(torus, [](std::span<const double>) { return 0.5; },
                                            rng);
      },
      T, std::vector<double>{T}, trajectories, 777, 1);
  const EnsembleStatistics st = ensemble_mean(torus, ens, 0, M);
  const Eigen::VectorXd goal = coarsen(g, target.slices.back(), M);
  const double l1 = l1_distance(make_grid(1, M), st.mean.values(), goal);
  return {l1 <= 0.05, "L1 to target " + fmt(l1)};
}

Outcome invariant_suite() {
  const CheckReport rep = run_checks();
  int failed = 0;
  std::string names;
  for (const auto& r : rep.results) {
    if (!r.passed) {
      ++failed;
      names += " " + r.name;
    }
  }
  return {rep.passed() && rep.seconds <= 300.0,
          std::to_string(rep.results.size()) + " checks, " + std::to_string(failed) +
              " failed" + names + ", " + fmt(rep.seconds) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; default runs all.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient-case stationary invariance", 1.0, gradient_invariance},
      {2, "conservative-field reversibility", 1.0, conservative_reversibility},
      {3, "non-gradient signature", 1.0, non_gradient_signature},
      {4, "hydrodynamic convergence", 600.0, hydrodynamic_convergence},
      {5, "mobility oracle", 60.0, mobility_oracle},
      {6, "thermodynamics oracle", 60.0, thermodynamics_oracle},
      {7, "rate-functional null and quadratic response", 120.0, rate_functional_response},
      {8, "quasi-potential identity", 300.0, quasi_potential_identity},
      {9, "duality and Lyapunov identities", 120.0, duality_and_lyapunov},
      {10, "microscopic steering", 600.0, microscopic_steering},
      {11, "invariant suite", 300.0, invariant_suite},
  };
  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %2d (%s): %s [%.2f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
