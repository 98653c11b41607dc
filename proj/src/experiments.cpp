#include "kawasaki/experiments.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kawasaki/errors.hpp"
#include "kawasaki/io.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/transport.hpp"

namespace kawasaki {

using json = nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

// Single writer stage: every file carries the version and config hash.
class OutputDir {
 public:
  explicit OutputDir(const RunContext& ctx)
      : root_(ctx.directory()), hash_(ctx.config.hash()) {
    fs::create_directories(root_);
    std::ofstream cfg(root_ / "config.ini");
    cfg << "# kawasaki " << version_string() << "\n# config " << hash_ << '\n'
        << ctx.config.serialize();
  }

  template <class Body>
  void csv(const std::string& name, Body&& body) const {
    std::ofstream out(root_ / name);
    out << "# kawasaki " << version_string() << "\n# config " << hash_ << '\n';
    body(out);
    if (!out) throw std::runtime_error("cannot write " + (root_ / name).string());
  }

  void write_json(const std::string& name, json body) const {
    json doc;
    doc["meta"] = {{"version", std::string(version_string())}, {"config_hash", hash_}};
    for (auto& [k, v] : body.items()) doc[k] = v;
    std::ofstream out(root_ / name);
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (root_ / name).string());
  }

  template <class Body>
  void binary(const std::string& name, Body&& body) const {
    std::ofstream out(root_ / name, std::ios::binary);
    body(out);
    // The binary layout has no room for text, so metadata sits beside it.
    write_json(name + ".meta.json", json{{"file", name}});
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::string hash_;
};

class Stopwatch {
 public:
  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    laps_[phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json to_json() const {
    json j;
    double total = 0.0;
    for (const auto& [k, v] : laps_) {
      j[k] = v;
      total += v;
    }
    j["total_seconds"] = total;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> laps_;
};

void write_timing(const OutputDir& out, const Stopwatch& sw) {
  std::ofstream f(out.root() / "timing.json");
  f << sw.to_json().dump(2) << '\n';
}

std::function<double(std::span<const double>)> bounded_profile(const FourierSeries& s,
                                                               const std::string& what) {
  return [s, what](std::span<const double> r) {
    const double v = s.value(r);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(what + ": profile value " + fmt_double(v) + " outside [0,1]");
    }
    return v;
  };
}

RateModel make_model(const ExperimentConfig& c, int N) {
  return RateModel(make_torus(c.model.d, N), c.interaction(), c.rate_family(), c.field_spec());
}

json path_summary(const Path& p) {
  return {{"slices", p.size()}, {"t_start", p.times.front()}, {"t_end", p.times.back()},
          {"grid", {{"d", p.grid.d}, {"M", p.grid.M}}}};
}

ThermoTable make_thermo(const ExperimentConfig& c) {
  return free_energy_table(c.interaction(), c.thermo_options());
}

}  // namespace

Coefficients model_coefficients(const ExperimentConfig& config, const ThermoTable& thermo) {
  if (config.interaction().is_zero() &&
      config.rate_family().kind == RateFamily::Kind::kHeatBath) {
    return Coefficients::ssep();
  }
  const ThermoTable* t = config.interaction().is_zero() ? nullptr : &thermo;
  return Coefficients::from_models(
      MobilityModel::variational(config.rate_family(), config.interaction(),
                                 config.numerics.k, 65, t),
      thermo);
}

DensityField profile_on_grid(const FourierSeries& profile, const Grid& grid,
                             const std::string& what) {
  return DensityField::from_function(grid, bounded_profile(profile, what));
}

std::vector<HydroCompareRow> hydro_compare(const ExperimentConfig& c, int threads) {
  validate_for(c, "hydro-compare");
  const std::vector<int> ladder = c.run.n_ladder.empty() ? std::vector<int>{c.model.N}
                                                         : c.run.n_ladder;
  const std::vector<double> obs = c.observation_times();
  const FieldSpec field = c.field_spec();
  const ThermoTable thermo = make_thermo(c);
  const Coefficients coeffs = model_coefficients(c, thermo);
  const auto initial_fn = bounded_profile(c.initial_profile(), "run.initial");
  const Grid pde_grid = make_grid(c.model.d, c.numerics.pde_M);
  const DensityField initial = profile_on_grid(c.initial_profile(), pde_grid, "run.initial");

  // PDE solution at each observation time, coarsened to the comparison grid.
  std::vector<Eigen::VectorXd> macro;
  std::vector<double> macro_drift;
  for (double t : obs) {
    if (t == 0.0) {
      macro.push_back(coarsen(pde_grid, initial.values(), c.numerics.M));
      macro_drift.push_back(0.0);
      continue;
    }
    SolveOptions so;
    so.T = t;
    so.c_safe = c.numerics.c_safe;
    so.output_every = 1 << 30;
    const HydroSolution sol = solve_hydro(initial, field, coeffs, so);
    macro.push_back(coarsen(pde_grid, sol.path.slices.back(), c.numerics.M));
    macro_drift.push_back(sol.report.mass_drift);
  }

  std::vector<HydroCompareRow> rows;
  for (int N : ladder) {
    const RateModel model = make_model(c, N);
    const Torus& torus = model.torus();
    const auto trajectories = run_ensemble(
        model,
        [&](Rng& rng) { return sample_product_configuration(torus, initial_fn, rng); },
        c.run.T, obs, c.run.trajectories, *c.run.seed, threads);
    const Grid coarse = make_grid(c.model.d, c.numerics.M);
    // Initial counts are not stored unless 0 is observed; redraw them from
    // the per-trajectory seeds.
    double initial_mass = 0.0;
    std::vector<int> counts0;
    for (int k = 0; k < c.run.trajectories; ++k) {
      Rng rng(stream_seed(*c.run.seed, static_cast<std::uint64_t>(k)));
      const Configuration eta = sample_product_configuration(torus, initial_fn, rng);
      counts0.push_back(eta.count());
      initial_mass += static_cast<double>(eta.count()) / torus.num_sites();
    }
    initial_mass /= c.run.trajectories;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const EnsembleStatistics stats =
          ensemble_mean(torus, trajectories, static_cast<int>(i), c.numerics.M);
      HydroCompareRow row;
      row.N = N;
      row.t = obs[i];
      row.l1 = l1_distance(coarse, stats.mean.values(), macro[i]);
      row.micro_mass = stats.mean.mass();
      row.micro_mass_t0 = initial_mass;
      row.macro_mass = macro[i].mean();
      row.macro_mass_drift = macro_drift[i];
      for (int k = 0; k < c.run.trajectories; ++k) {
        row.max_particle_drift = std::max(
            row.max_particle_drift,
            std::abs(static_cast<double>(trajectories[k].samples[i].count() - counts0[k])));
      }
      row.clt_scale = std::sqrt(static_cast<double>(coarse.cells()) /
                                (c.run.trajectories * static_cast<double>(torus.num_sites())));
      row.mean_standard_error = stats.standard_error.mean();
      rows.push_back(row);
    }
  }
  return rows;
}

StationaryReport exact_stationary(const ExperimentConfig& c) {
  validate_for(c, "exact-stationary");
  const RateModel model = make_model(c, c.model.N);
  const Torus& torus = model.torus();
  const int K = c.run.K > 0 ? c.run.K : torus.num_sites() / 2;
  const SectorGenerator gen = generator_matrix(model, K);
  const StationaryResult st = stationary_exact(gen);
  StationaryReport rep;
  rep.states = static_cast<int>(gen.states.size());
  rep.pi = st.distribution;
  rep.solve_residual = st.residual;
  const FieldSpec field = model.field();
  std::vector<double> potential;
  rep.conservative = field.is_conservative() && !field.potential().is_flat();
  if (rep.conservative) {
    for (int x = 0; x < torus.num_sites(); ++x) {
      const Vec3 r = site_position(torus, x);
      potential.push_back(field.U(std::span<const double>(r.data(), torus.dim())));
    }
  }
  rep.reference = canonical_exact(model.interaction(), torus, K, potential);
  rep.max_deviation = (rep.pi - rep.reference).cwiseAbs().maxCoeff();
  rep.detailed_balance = detailed_balance_residual(gen, rep.reference);
  rep.verdict = rep.max_deviation <= 1e-10 ? "gradient" : "non-gradient";
  return rep;
}

int run_simulate(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "simulate");
  Stopwatch sw;
  const OutputDir out(ctx);
  const RateModel model = make_model(c, c.model.N);
  const Torus& torus = model.torus();
  const auto initial_fn = bounded_profile(c.initial_profile(), "run.initial");
  const std::vector<double> obs = c.observation_times();
  const auto trajectories = run_ensemble(
      model, [&](Rng& rng) { return sample_product_configuration(torus, initial_fn, rng); },
      c.run.T, obs, c.run.trajectories, *c.run.seed, ctx.threads);
  sw.lap("ensemble_seconds");

  std::uint64_t events = 0;
  std::uint64_t proposals = 0;
  bool conserved = true;
  for (const Trajectory& tr : trajectories) {
    events += tr.events;
    proposals += tr.proposals;
    for (const auto& s : tr.samples) conserved = conserved && s.count() == tr.samples[0].count();
  }
  json times = json::array();
  const Grid coarse = make_grid(c.model.d, c.numerics.M);
  if (c.wants("csv")) {
    out.csv("density.csv", [&](std::ostream& os) {
      os << "t,";
      for (int i = 0; i < c.model.d; ++i) os << (i ? "j," : "i,");
      os << "mean,standard_error\n";
      for (std::size_t k = 0; k < obs.size(); ++k) {
        const EnsembleStatistics st =
            ensemble_mean(torus, trajectories, static_cast<int>(k), c.numerics.M);
        for (int cell = 0; cell < coarse.cells(); ++cell) {
          const Coords cc = coarse.coords(cell);
          os << fmt_double(obs[k]) << ',';
          for (int i = 0; i < c.model.d; ++i) os << cc[i] << ',';
          os << fmt_double(st.mean[cell]) << ',' << fmt_double(st.standard_error[cell]) << '\n';
        }
      }
    });
  }
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const EnsembleStatistics st =
        ensemble_mean(torus, trajectories, static_cast<int>(k), c.numerics.M);
    times.push_back({{"t", obs[k]}, {"mass", st.mean.mass()}});
  }
  if (c.wants("bin")) {
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
      out.binary("trajectory_" + std::to_string(k) + ".bin",
                 [&](std::ostream& os) { write_trajectory_binary(os, torus, trajectories[k]); });
    }
  }
  if (c.wants("json")) {
    out.write_json("summary.json",
                   {{"subcommand", "simulate"},
                    {"d", c.model.d},
                    {"N", c.model.N},
                    {"M", c.numerics.M},
                    {"trajectories", c.run.trajectories},
                    {"events", events},
                    {"proposals", proposals},
                    {"particles_conserved", conserved},
                    {"observations", times}});
  }
  sw.lap("output_seconds");
  write_timing(out, sw);
  return conserved ? 0 : 3;
}

int run_hydro_compare(const RunContext& ctx) {
  Stopwatch sw;
  const OutputDir out(ctx);
  const auto rows = hydro_compare(ctx.config, ctx.threads);
  sw.lap("compare_seconds");
  bool conserved = true;
  json jr = json::array();
  for (const auto& r : rows) {
    conserved = conserved && r.max_particle_drift == 0.0 && std::abs(r.macro_mass_drift) < 1e-12;
    jr.push_back({{"N", r.N},
                  {"t", r.t},
                  {"l1", r.l1},
                  {"micro_mass", r.micro_mass},
                  {"micro_mass_t0", r.micro_mass_t0},
                  {"macro_mass", r.macro_mass},
                  {"macro_mass_drift", r.macro_mass_drift},
                  {"max_particle_drift", r.max_particle_drift},
                  {"clt_scale", r.clt_scale},
                  {"mean_standard_error", r.mean_standard_error}});
  }
  if (ctx.config.wants("csv")) {
    out.csv("hydro_compare.csv", [&](std::ostream& os) {
      os << "N,t,l1,micro_mass,macro_mass,clt_scale\n";
      for (const auto& r : rows) {
        os << r.N << ',' << fmt_double(r.t) << ',' << fmt_double(r.l1) << ','
           << fmt_double(r.micro_mass) << ',' << fmt_double(r.macro_mass) << ','
           << fmt_double(r.clt_scale) << '\n';
      }
    });
  }
  if (ctx.config.wants("json")) {
    out.write_json("hydro_compare.json",
                   {{"subcommand", "hydro-compare"}, {"conserved", conserved}, {"rows", jr}});
  }
  write_timing(out, sw);
  return conserved ? 0 : 3;
}

int run_exact_stationary(const RunContext& ctx) {
  Stopwatch sw;
  const OutputDir out(ctx);
  const StationaryReport rep = exact_stationary(ctx.config);
  sw.lap("solve_seconds");
  if (ctx.config.wants("csv")) {
    const Torus torus = make_torus(ctx.config.model.d, ctx.config.model.N);
    const int K = ctx.config.run.K > 0 ? ctx.config.run.K : torus.num_sites() / 2;
    const auto states = enumerate_sector(torus, K);
    out.csv("stationary.csv", [&](std::ostream& os) {
      os << "state,pi,reference\n";
      for (std::size_t i = 0; i < states.size(); ++i) {
        for (int b : states[i].bits()) os << b;
        os << ',' << fmt_double(rep.pi[static_cast<Eigen::Index>(i)]) << ','
           << fmt_double(rep.reference[static_cast<Eigen::Index>(i)]) << '\n';
      }
    });
  }
  if (ctx.config.wants("json")) {
    out.write_json("stationary.json", {{"subcommand", "exact-stationary"},
                                       {"states", rep.states},
                                       {"max_deviation", rep.max_deviation},
                                       {"detailed_balance_residual", rep.detailed_balance},
                                       {"solve_residual", rep.solve_residual},
                                       {"reference",
                                        rep.conservative ? "gibbs with external potential"
                                                         : "canonical gibbs"},
                                       {"verdict", rep.verdict}});
  }
  write_timing(out, sw);
  return 0;
}

int run_mobility(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "mobility");
  Stopwatch sw;
  const OutputDir out(ctx);
  const ThermoTable thermo = make_thermo(c);
  const ThermoTable* tp = c.interaction().is_zero() ? nullptr : &thermo;
  std::vector<double> rhos;
  std::vector<Eigen::MatrixXd> sig;
  json rows = json::array();
  for (double rho : c.run.rho) {
    const MobilityResult m =
        mobility_variational(c.rate_family(), c.interaction(), rho, c.numerics.k, c.model.d, tp);
    rhos.push_back(rho);
    sig.push_back(m.sigma);
    json s = json::array();
    for (int i = 0; i < m.sigma.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < m.sigma.cols(); ++j) row.push_back(m.sigma(i, j));
      s.push_back(row);
    }
    rows.push_back({{"rho", rho},
                    {"sigma", s},
                    {"sigma_f0_11", m.sigma_f0(0, 0)},
                    {"improvement", m.improvement},
                    {"support_radius", m.support_radius},
                    {"unknowns", m.unknowns},
                    {"window_sites", m.window_sites},
                    {"rank", m.rank},
                    {"condition", m.condition},
                    {"exact_measure", m.exact_measure}});
  }
  sw.lap("mobility_seconds");
  if (c.wants("csv")) {
    out.csv("mobility.csv", [&](std::ostream& os) { write_transport_csv(os, rhos, sig, thermo); });
  }
  if (c.wants("json")) out.write_json("mobility.json", {{"subcommand", "mobility"}, {"points", rows}});
  write_timing(out, sw);
  return 0;
}

int run_thermo(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "thermo");
  Stopwatch sw;
  const OutputDir out(ctx);
  const ThermoTable thermo = make_thermo(c);
  sw.lap("table_seconds");
  if (c.wants("csv")) out.csv("thermo.csv", [&](std::ostream& os) { thermo.write_csv(os); });
  json pts = json::array();
  for (double rho : c.run.rho) {
    json p = {{"rho", rho}, {"chi", compressibility(thermo, rho)}, {"f", thermo.f(rho)}};
    if (rho >= thermo.rho_min() && rho <= thermo.rho_max()) {
      p["fprime"] = thermo.fprime(rho);
      p["fsecond"] = thermo.fsecond(rho);
    }
    pts.push_back(p);
  }
  if (c.wants("json")) {
    out.write_json("thermo.json", {{"subcommand", "thermo"},
                                   {"points", pts},
                                   {"chi_bound_constant", thermo.chi_bound_constant()},
                                   {"min_second_difference", thermo.min_second_difference()},
                                   {"rho_min", thermo.rho_min()}});
  }
  write_timing(out, sw);
  return thermo.min_second_difference() > 0.0 ? 0 : 3;
}

int run_ratefn(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "ratefn");
  Stopwatch sw;
  const OutputDir out(ctx);
  const ThermoTable thermo = make_thermo(c);
  const Coefficients coeffs = model_coefficients(c, thermo);
  const FieldSpec field = c.field_spec();
  const Grid grid = make_grid(c.model.d, c.numerics.pde_M);
  const DensityField initial = profile_on_grid(c.initial_profile(), grid, "run.initial");

  // Drive the hydrodynamic equation with the extra field 2 grad H; the
  // resulting path has rate sum_t <grad H, sigma grad H>.
  const FourierSeries H = c.control_potential();
  Eigen::VectorXd h(grid.cells());
  for (int cell = 0; cell < grid.cells(); ++cell) {
    const auto r = grid.center(cell);
    h[cell] = H.value(std::span<const double>(r.data(), grid.d));
  }
  const FaceField drift = gradient_faces(grid, 2.0 * h);
  double bound = 0.0;
  for (const auto& v : drift.axis) bound = std::max(bound, v.cwiseAbs().maxCoeff());
  SolveOptions so;
  so.T = c.run.T;
  so.c_safe = c.numerics.c_safe;
  so.output_every = c.numerics.output_every;
  so.drift_bound = bound;
  const bool driven = !H.is_flat();
  const HydroSolution sol =
      driven ? solve_hydro(initial, field, coeffs, so,
                           [drift](double, FaceField& add) { add += drift; })
             : solve_hydro(initial, field, coeffs, so);
  sw.lap("solve_seconds");
  const RateEval eval = rate_functional(sol.path, field, coeffs);
  const double dual = rate_functional_dual(sol.path, field, coeffs, c.numerics.modes);
  // Expected value: sum_t w_t <grad H, sigma(pi_t) grad H>.
  const FaceField gh = gradient_faces(grid, h);
  const auto w = trapezoid_weights(sol.path.times);
  double expected = 0.0;
  for (int k = 0; k < sol.path.size(); ++k) {
    const FaceField s = face_mobility(grid, sol.path.slices[k], coeffs);
    double e = 0.0;
    for (int a = 0; a < grid.d; ++a) e += s.axis[a].dot(gh.axis[a].cwiseProduct(gh.axis[a]));
    expected += w[k] * e * grid.cell_volume();
  }
  sw.lap("rate_seconds");
  if (c.wants("csv")) {
    out.csv("ratefn_slices.csv", [&](std::ostream& os) {
      os << "t,slice_value,elliptic_residual,mean_residual\n";
      for (std::size_t k = 0; k < eval.slice_values.size(); ++k) {
        os << fmt_double(eval.times[k]) << ',' << fmt_double(eval.slice_values[k]) << ','
           << fmt_double(eval.elliptic_residuals[k]) << ',' << fmt_double(eval.mean_residuals[k])
           << '\n';
      }
    });
  }
  if (c.wants("json")) {
    out.write_json("ratefn.json", {{"subcommand", "ratefn"},
                                   {"value", eval.finite() ? json(eval.value) : json("inf")},
                                   {"expected_quadratic", expected},
                                   {"dual_lower_bound", dual},
                                   {"diagnostic", eval.diagnostic},
                                   {"path", path_summary(sol.path)},
                                   {"solver", json::parse(sol.report.to_json())}});
  }
  write_timing(out, sw);
  return 0;
}

int run_quasipotential(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "quasipotential");
  Stopwatch sw;
  const OutputDir out(ctx);
  const ThermoTable thermo = make_thermo(c);
  const Coefficients coeffs = model_coefficients(c, thermo);
  const FieldSpec field = c.field_spec();
  const Grid grid = make_grid(c.model.d, c.numerics.pde_M);
  const DensityField target = profile_on_grid(c.target_profile(), grid, "run.target");
  ExitOptions eo;
  eo.tolerance = c.numerics.tolerance;
  eo.c_safe = c.numerics.c_safe;
  eo.output_every = c.numerics.output_every;
  const ExitPlan plan = optimal_exit_path(target, target.mass(), field, coeffs, thermo, eo);
  sw.lap("exit_path_seconds");
  if (c.wants("csv")) {
    out.csv("exit_path.csv", [&](std::ostream& os) { write_path_csv(os, plan.path); });
    out.csv("stationary_profile.csv",
            [&](std::ostream& os) { write_density_csv(os, grid, plan.gamma.values()); });
  }
  if (c.wants("json")) {
    json j = json::parse(plan.to_json());
    j["subcommand"] = "quasipotential";
    out.write_json("quasipotential.json", j);
  }
  write_timing(out, sw);
  return 0;
}

int run_duality_check(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  validate_for(c, "duality-check");
  Stopwatch sw;
  const OutputDir out(ctx);
  const ThermoTable thermo = make_thermo(c);
  const Coefficients coeffs = model_coefficients(c, thermo);
  const FieldSpec field = c.field_spec();
  const Grid grid = make_grid(c.model.d, c.numerics.pde_M);
  const DensityField initial = profile_on_grid(c.initial_profile(), grid, "run.initial");
  const DensityField gamma = stationary_profile(initial.mass(), field, thermo, grid);
  SolveOptions so;
  so.T = c.run.T;
  so.c_safe = c.numerics.c_safe;
  so.output_every = c.numerics.output_every;
  const HydroSolution sol = solve_hydro(initial, field, coeffs, so);
  const DualityReport dual = duality_defect(sol.path, field, coeffs, thermo, gamma);
  const LyapunovSeries lyap = lyapunov_series(sol.path, field, coeffs, thermo, gamma);
  sw.lap("check_seconds");
  if (c.wants("csv")) {
    out.csv("lyapunov.csv", [&](std::ostream& os) {
      os << "t,F,dissipation,dFdt,defect\n";
      for (std::size_t k = 0; k < lyap.times.size(); ++k) {
        os << fmt_double(lyap.times[k]) << ',' << fmt_double(lyap.F[k]) << ','
           << fmt_double(lyap.dissipation[k]) << ',' << fmt_double(lyap.dFdt[k]) << ','
           << fmt_double(lyap.defect[k]) << '\n';
      }
    });
  }
  if (c.wants("json")) {
    out.write_json("duality.json", {{"subcommand", "duality-check"},
                                    {"I_forward", dual.I_forward},
                                    {"I_reversed", dual.I_reversed},
                                    {"F_start", dual.F_start},
                                    {"F_end", dual.F_end},
                                    {"duality_defect", dual.defect},
                                    {"lyapunov_max_defect", lyap.max_defect},
                                    {"lyapunov_max_increase", lyap.max_increase},
                                    {"path", path_summary(sol.path)}});
  }
  write_timing(out, sw);
  return 0;
}

}  // namespace kawasaki
