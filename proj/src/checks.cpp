#include "kawasaki/checks.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>

#include "kawasaki/config.hpp"
#include "kawasaki/dynamics.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/ldp.hpp"
#include "kawasaki/pde.hpp"
#include "kawasaki/rng.hpp"
#include "kawasaki/transport.hpp"

namespace kawasaki {

namespace {

using Suite = std::vector<CheckResult>;

void record(Suite& s, std::string name, double value, double tol, std::string detail = {},
            bool below = true) {
  const bool ok = std::isfinite(value) && (below ? value <= tol : value > tol);
  s.push_back({std::move(name), ok, value, tol, std::move(detail)});
}

Configuration random_config(int sites, Rng& rng, double p = 0.5) {
  Configuration eta(sites);
  for (int x = 0; x < sites; ++x) eta.set(x, rng.bernoulli(p));
  return eta;
}

void lattice_checks(Suite& s) {
  Rng rng(11);
  double exchange_bad = 0.0;
  double shift_bad = 0.0;
  for (const auto& [d, N] : {std::pair{1, 12}, std::pair{2, 4}, std::pair{1, 3}}) {
    const Torus torus(d, N);
    for (int rep = 0; rep < 20; ++rep) {
      const Configuration eta = random_config(torus.num_sites(), rng);
      for (const Bond& b : torus.bonds()) {
        const Configuration once = exchange(torus, eta, b);
        exchange_bad += !(exchange(torus, once, b) == eta);
        exchange_bad += once.count() != eta.count();
      }
      shift_bad += !(shift(torus, eta, 0) == eta);
      for (int a = 0; a < torus.num_sites(); a += 3) {
        for (int b = 0; b < torus.num_sites(); b += 5) {
          shift_bad += !(shift(torus, shift(torus, eta, a), b) == shift(torus, eta, torus.add(a, b)));
        }
        shift_bad += !(shift(torus, shift(torus, eta, a), torus.negate(a)) == eta);
      }
    }
  }
  record(s, "lattice.exchange_involution", exchange_bad, 0.0, "exchange twice is the identity");
  record(s, "lattice.shift_group_law", shift_bad, 0.0, "tau_a tau_b = tau_{a+b}");
  double sector_bad = 0.0;
  for (int K = 0; K <= 10; ++K) {
    sector_bad += std::abs(static_cast<double>(enumerate_sector(Torus(1, 10), K).size()) -
                           static_cast<double>(binomial(10, K)));
  }
  record(s, "lattice.sector_size", sector_bad, 0.0, "|Omega_{N,K}| = C(N,K)");
}

void gibbs_checks(Suite& s) {
  double worst_convexity = kInfinity;
  double worst_roundtrip = 0.0;
  double worst_chi_c = 0.0;
  for (double J : {0.0, 0.5, -0.5}) {
    const ThermoTable t = free_energy_table(J == 0.0 ? Interaction::zero()
                                                     : Interaction::nearest_neighbor(J));
    worst_convexity = std::min(worst_convexity, t.min_second_difference());
    for (double rho = 0.05; rho < 0.96; rho += 0.05) {
      worst_roundtrip = std::max(worst_roundtrip, std::abs(t.inverse_fprime(t.fprime(rho)) - rho));
    }
    if (J <= 0.5) worst_chi_c = std::max(worst_chi_c, t.chi_bound_constant());
  }
  record(s, "gibbs.legendre_convexity", worst_convexity, 0.0,
         "smallest second difference of f (must be > 0)", false);
  record(s, "gibbs.legendre_inverse", worst_roundtrip, 1e-8, "(f')^{-1}(f'(rho)) = rho");
  record(s, "gibbs.compressibility_bound", worst_chi_c, 4.0,
         "C in chi/(rho(1-rho)) in [1/C, C] for J <= 1/2");
}

void dynamics_checks(Suite& s, const CheckOptions& opt) {
  const Torus torus(1, 8);
  FieldSpec conservative =
      FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.7, {1, 0, 0}).add_sin(0.3, {2, 0, 0}));
  RateModel model(torus, Interaction::nearest_neighbor(0.5), RateFamily::heat_bath(), conservative);
  if (opt.corrupt_rates) {
    const RateModel clean = model;
    model.set_rate_override([clean](const Configuration& eta, int b) {
      const double r = clean.rate(eta, b);
      return b == 0 && eta[0] ? 1.25 * r : r;
    });
  }
  const SectorGenerator gen = generator_matrix(model, 4);
  double row_sum = 0.0;
  for (Eigen::Index i = 0; i < gen.matrix.rows(); ++i) {
    row_sum = std::max(row_sum, std::abs(gen.matrix.row(i).sum()));
  }
  record(s, "dynamics.generator_rows", row_sum, 1e-9, "rows of the sector generator sum to 0");
  std::vector<double> pot;
  for (int x = 0; x < torus.num_sites(); ++x) {
    const Vec3 r = site_position(torus, x);
    pot.push_back(conservative.U(std::span<const double>(r.data(), 1)));
  }
  const Eigen::VectorXd gibbs = canonical_exact(model.interaction(), torus, 4, pot);
  // Residual relative to the largest probability flux.
  double scale = 0.0;
  for (Eigen::Index i = 0; i < gen.matrix.rows(); ++i) {
    scale = std::max(scale, gibbs[i] * std::abs(gen.matrix.coeff(i, i)));
  }
  record(s, "dynamics.detailed_balance", detailed_balance_residual(gen, gibbs) / scale, 1e-12,
         opt.corrupt_rates ? "mutation hook active: rates corrupted on bond 0"
                           : "c^E reversible w.r.t. exp{-H - sum U eta} (N=8, K=4, J=0.5)");

  const std::array<double, 1> e1{1.0};
  const RateModel ssep(Torus(1, 6), Interaction::zero(), RateFamily::heat_bath(),
                       FieldSpec::constant(e1));
  const StationaryResult st = stationary_exact(generator_matrix(ssep, 3));
  const double uniform = 1.0 / static_cast<double>(st.distribution.size());
  record(s, "dynamics.gradient_invariance", (st.distribution.array() - uniform).abs().maxCoeff(),
         1e-10, "constant field leaves the uniform measure invariant (N=6, K=3)");
}

void kmc_checks(Suite& s, const CheckOptions& opt) {
  const Torus torus(1, 32);
  const std::array<double, 1> e{1.5};
  const FieldSpec field = FieldSpec::constant(e);
  const RateModel model(torus, Interaction::nearest_neighbor(0.3),
                        RateFamily::neighbor_weighted(0.5), field);
  Rng rng(5);
  const Configuration eta0 = random_config(torus.num_sites(), rng, 0.4);
  const std::vector<double> obs = {0.01, 0.02, 0.05};
  const Trajectory a = kmc_run(model, eta0, 0.05, obs, 77);
  const Trajectory b = kmc_run(model, eta0, 0.05, obs, 77);
  double drift = 0.0;
  for (const auto& c : a.samples) drift = std::max(drift, std::abs(double(c.count() - eta0.count())));
  record(s, "kmc.particle_conservation", drift, 0.0,
         "particle number along a driven interacting trajectory (" + std::to_string(a.events) +
             " events)");
  double diff = a.events != b.events;
  for (std::size_t k = 0; k < a.samples.size(); ++k) diff += !(a.samples[k] == b.samples[k]);
  record(s, "kmc.determinism_seed", diff, 0.0, "same seed gives the same trajectory");

  const auto init = [&](Rng& r) { return random_config(torus.num_sites(), r, 0.5); };
  const auto e1 = run_ensemble(model, init, 0.02, std::vector<double>{0.02}, 4, 99, 1);
  const auto e2 = run_ensemble(model, init, 0.02, std::vector<double>{0.02}, 4, 99,
                               std::max(2, opt.threads));
  double tdiff = 0.0;
  for (std::size_t k = 0; k < e1.size(); ++k) tdiff += !(e1[k].samples[0] == e2[k].samples[0]);
  record(s, "kmc.determinism_threads", tdiff, 0.0, "ensemble independent of worker count");

  KmcEngine engine(model, eta0, 3);
  engine.advance(0.05);
  record(s, "kmc.rate_table", engine.table_discrepancy(), 1e-9,
         "incremental rate table matches a full recomputation");
}

void transport_checks(Suite& s) {
  const MobilityResult m =
      mobility_variational(RateFamily::heat_bath(), Interaction::zero(), 0.3, 1, 1);
  record(s, "transport.ssep_mobility", std::abs(m.sigma(0, 0) - 0.21), 1e-12,
         "sigma(0.3) = 0.21 for the exclusion process");
  const MobilityResult nw =
      mobility_variational(RateFamily::neighbor_weighted(0.5), Interaction::zero(), 0.5, 1, 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(nw.sigma);
  record(s, "transport.mobility_order", std::max(-nw.improvement, -es.eigenvalues().minCoeff()),
         1e-12, "0 <= sigma_1 <= sigma_0");
}

void pde_checks(Suite& s) {
  const std::array<double, 1> e{1.0};
  const Grid g1 = make_grid(1, 64);
  const DensityField init1 = DensityField::from_function(
      g1, [](std::span<const double> r) { return 0.5 + 0.3 * std::sin(2 * std::numbers::pi * r[0]); });
  SolveOptions so;
  so.T = 0.05;
  const HydroSolution h1 = solve_hydro(init1, FieldSpec::constant(e), Coefficients::ssep(), so);
  const Grid g2 = make_grid(2, 16);
  FieldSpec f2(2);
  f2.set_potential(FourierSeries(0.0).add_cos(0.4, {1, 0, 0}));
  f2.set_stream_function(FourierSeries(0.0).add_sin(0.2, {0, 1, 0}));
  const DensityField init2 = DensityField::from_function(g2, [](std::span<const double> r) {
    return 0.5 + 0.2 * std::cos(2 * std::numbers::pi * (r[0] + r[1]));
  });
  const HydroSolution h2 = solve_hydro(init2, f2, Coefficients::ssep(), so);
  record(s, "pde.mass_conservation", std::max(h1.report.mass_drift, h2.report.mass_drift), 1e-13,
         "discrete mass drift in d = 1 and d = 2");
  double overshoot = 0.0;
  for (const auto& sl : h1.path.slices) {
    overshoot = std::max(overshoot, sl.maxCoeff() - init1.values().maxCoeff());
    overshoot = std::max(overshoot, init1.values().minCoeff() - sl.minCoeff());
  }
  record(s, "pde.maximum_principle", overshoot, 1e-12,
         "constant-field solution stays in the initial range");
}

void ldp_checks(Suite& s) {
  const Grid g = make_grid(1, 64);
  const FieldSpec field = FieldSpec::conservative(1, FourierSeries(0.0).add_cos(0.3, {1, 0, 0}));
  const ThermoTable thermo(Interaction::zero());
  const Coefficients co = Coefficients::ssep();
  const DensityField gamma = stationary_profile(0.5, field, thermo, g);
  const DensityField init = DensityField::from_function(
      g, [](std::span<const double> r) { return 0.5 + 0.2 * std::sin(2 * std::numbers::pi * r[0]); });
  SolveOptions so;
  so.T = 0.02;
  const HydroSolution h = solve_hydro(init, field, co, so);
  const RateEval null_rate = rate_functional(h.path, field, co);
  record(s, "ldp.rate_null_on_hydro_path", std::abs(null_rate.value), 1e-3,
         "I of a solver path vanishes up to discretization");

  // A path that ignores the field altogether costs something positive.
  Path off = h.path;
  for (std::size_t k = 0; k < off.slices.size(); ++k) {
    const double lam = off.times[k] / so.T;
    off.slices[k] = (1 - lam) * init.values() + lam * gamma.values();
  }
  const RateEval pos = rate_functional(off, field, co);
  record(s, "ldp.rate_nonnegative", -pos.value, 0.0, "I >= 0 on an arbitrary path");
  double worst_mean = 0.0;
  for (double m : pos.mean_residuals) worst_mean = std::max(worst_mean, std::abs(m));
  record(s, "ldp.elliptic_solvability", worst_mean, 1e-12,
         "relative mean residual before each elliptic solve");

  const double f0 = quasi_potential(gamma, gamma, thermo);
  double min_gap = kInfinity;
  double worst_second = 0.0;
  Eigen::VectorXd bump(g.cells());
  for (int c = 0; c < g.cells(); ++c) bump[c] = std::sin(2 * std::numbers::pi * g.center(c)[0]);
  std::vector<double> line;
  for (int i = -4; i <= 4; ++i) {
    const DensityField rho(g, gamma.values() + 0.05 * i * bump);
    const double v = quasi_potential(rho, gamma, thermo);
    line.push_back(v);
    if (i != 0) min_gap = std::min(min_gap, v);
  }
  for (std::size_t i = 1; i + 1 < line.size(); ++i) {
    worst_second = std::max(worst_second, -(line[i + 1] - 2 * line[i] + line[i - 1]));
  }
  record(s, "ldp.quasi_potential_zero", std::abs(f0), 1e-14, "F(gamma) = 0");
  record(s, "ldp.quasi_potential_positive", min_gap, 0.0, "F > 0 away from gamma", false);
  record(s, "ldp.quasi_potential_convex", worst_second, 1e-14,
         "second differences along a line are >= 0");
}

void config_checks(Suite& s) {
  ExperimentConfig c;
  c.model.d = 2;
  c.model.N = 16;
  c.model.rates = "neighbor_weighted";
  c.model.a = 0.5;
  c.field.E = {0.1, 1.0 / 3.0};
  c.field.psi = "0; 0.2*sin[0,1]";
  c.run.seed = 0xFFFFFFFFFFFFFFFFULL;
  c.run.observe = {0.01, 0.1};
  c.run.n_ladder = {16, 32};
  c.output.formats = {"json"};
  const ExperimentConfig back = parse_config(c.serialize());
  record(s, "cli.config_roundtrip", back == c && back.serialize() == c.serialize() ? 0.0 : 1.0,
         0.0, "parse(serialize(c)) == c");
}


}  // namespace

bool CheckReport::passed() const {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

std::string CheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    j["checks"].push_back({{"name", r.name},
                           {"passed", r.passed},
                           {"value", std::isfinite(r.value) ? nlohmann::ordered_json(r.value)
                                                            : nlohmann::ordered_json("non-finite")},
                           {"tolerance", r.tolerance},
                           {"detail", r.detail}});
  }
  return j.dump(2);
}

CheckReport run_checks(const CheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport rep;
  const std::vector<std::pair<std::string, std::function<void(Suite&)>>> groups = {
      {"lattice", lattice_checks},
      {"gibbs", gibbs_checks},
      {"dynamics", [&](Suite& s) { dynamics_checks(s, options); }},
      {"kmc", [&](Suite& s) { kmc_checks(s, options); }},
      {"transport", transport_checks},
      {"pde", pde_checks},
      {"ldp", ldp_checks},
      {"cli", config_checks},
  };
  for (const auto& [name, run] : groups) {
    try {
      run(rep.results);
    } catch (const std::exception& e) {
      rep.results.push_back({name + ".exception", false, kInfinity, 0.0, e.what()});
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace kawasaki
