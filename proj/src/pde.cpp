#include "kawasaki/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kawasaki/errors.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

Coefficients Coefficients::ssep() {
  return {[](double r) { return r * (1.0 - r); }, [](double r) { return 1.0 - 2.0 * r; },
          [](double) { return 1.0; }};
}

Coefficients Coefficients::from_models(MobilityModel mobility, const ThermoTable& thermo) {
  auto m = std::make_shared<MobilityModel>(std::move(mobility));
  const ThermoTable* t = &thermo;
  return {[m](double r) { return m->sigma(r); }, [m](double r) { return m->dsigma(r); },
          [m, t](double r) {
            const double rc = std::clamp(r, t->rho_min(), t->rho_max());
            return m->sigma(rc) * t->fsecond(rc);
          }};
}

double Coefficients::max_D(int samples) const {
  double top = 0.0;
  for (int q = 0; q < samples; ++q) top = std::max(top, D(static_cast<double>(q) / (samples - 1)));
  return top;
}

double Coefficients::max_dsigma(int samples) const {
  double top = 0.0;
  for (int q = 0; q < samples; ++q) {
    top = std::max(top, std::abs(dsigma(static_cast<double>(q) / (samples - 1))));
  }
  return top;
}

FaceField FaceField::zero(const Grid& grid) {
  FaceField f;
  f.axis.assign(grid.d, Eigen::VectorXd::Zero(grid.cells()));
  return f;
}

FaceField& FaceField::operator+=(const FaceField& other) {
  for (std::size_t a = 0; a < axis.size(); ++a) axis[a] += other.axis[a];
  return *this;
}

FaceField FaceField::scaled(double s) const {
  FaceField f = *this;
  for (auto& v : f.axis) v *= s;
  return f;
}

FaceField face_field(const FieldSpec& field, const Grid& grid) {
  if (field.dim() != grid.d) throw std::invalid_argument("field and grid dimensions differ");
  FaceField f = FaceField::zero(grid);
  const double dx = grid.dx();
  for (int c = 0; c < grid.cells(); ++c) {
    const auto r = grid.center(c);
    for (int a = 0; a < grid.d; ++a) {
      f.axis[a][c] = field.work(std::span<const double>(r.data(), grid.d), a, dx) / dx;
    }
  }
  return f;
}

FaceField gradient_faces(const Grid& grid, const Eigen::VectorXd& h) {
  FaceField f = FaceField::zero(grid);
  for (int c = 0; c < grid.cells(); ++c) {
    for (int a = 0; a < grid.d; ++a) {
      f.axis[a][c] = (h[grid.neighbor(c, a, 1)] - h[c]) * grid.M;
    }
  }
  return f;
}

namespace {

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

}  // namespace

void face_fluxes(const Grid& grid, const Eigen::VectorXd& rho, const FaceField& E,
                 const Coefficients& coeffs, FaceField& flux, FluxStats* stats) {
  const double dx = grid.dx();
  if (flux.axis.size() != static_cast<std::size_t>(grid.d)) flux = FaceField::zero(grid);
  for (int a = 0; a < grid.d; ++a) {
    const Eigen::VectorXd& e = E.axis[a];
    Eigen::VectorXd& out = flux.axis[a];
    for (int c = 0; c < grid.cells(); ++c) {
      const int r = grid.neighbor(c, a, 1);
      const double rl = rho[c];
      const double rr = rho[r];
      const double rf = 0.5 * (rl + rr);
      const double Df = coeffs.D(rf);
      const double diffusive = Df * (rr - rl) / dx;
      double advective = 0.0;
      if (e[c] != 0.0) {
        const double slope = std::max({std::abs(coeffs.dsigma(rl)), std::abs(coeffs.dsigma(rr)),
                                       std::abs(coeffs.dsigma(rf))});
        const double peclet = slope * std::abs(e[c]) * dx / std::max(Df, 1e-300);
        if (peclet > 2.0) {
          const double rll = rho[grid.neighbor(c, a, -1)];
          const double rrr = rho[grid.neighbor(r, a, 1)];
          const double sl = rl + 0.5 * minmod(rl - rll, rr - rl);
          const double sr = rr - 0.5 * minmod(rr - rl, rrr - rr);
          const double speed = std::max({std::abs(coeffs.dsigma(sl)), std::abs(coeffs.dsigma(sr)),
                                         std::abs(coeffs.dsigma(rf))}) *
                               std::abs(e[c]);
          advective = 0.5 * (coeffs.sigma(sl) + coeffs.sigma(sr)) * e[c] - 0.5 * speed * (sr - sl);
          if (stats != nullptr) ++stats->limiter_activations;
        } else {
          advective = coeffs.sigma(rf) * e[c];
        }
      }
      out[c] = advective - diffusive;
    }
  }
}

Eigen::VectorXd flux_divergence(const Grid& grid, const FaceField& flux) {
  Eigen::VectorXd div = Eigen::VectorXd::Zero(grid.cells());
  for (int a = 0; a < grid.d; ++a) {
    const Eigen::VectorXd& f = flux.axis[a];
    for (int c = 0; c < grid.cells(); ++c) div[c] += f[c] - f[grid.neighbor(c, a, -1)];
  }
  return div * grid.M;
}

std::string SolveReport::to_json() const {
  std::ostringstream os;
  os << "{\"grid\": {\"d\": " << d << ", \"M\": " << M << "}, \"dt\": " << fmt_double(dt)
     << ", \"steps\": " << steps << ", \"cfl\": " << fmt_double(cfl)
     << ", \"conservation_drift\": " << fmt_double(mass_drift)
     << ", \"limiter_activations\": " << limiter_activations
     << ", \"min_value\": " << fmt_double(min_value)
     << ", \"max_value\": " << fmt_double(max_value)
     << ", \"dirichlet_energy\": " << fmt_double(dirichlet_energy)
     << ", \"stopped_early\": " << (stopped_early ? "true" : "false") << "}";
  return os.str();
}

HydroSolution solve_hydro(const DensityField& initial, const FieldSpec& field,
                          const Coefficients& coeffs, const SolveOptions& options,
                          const ExtraDrift& extra) {
  const Grid& grid = initial.grid();
  if (grid.d > 2) throw std::invalid_argument("PDE solver supports d = 1, 2");
  if (!(options.T > 0.0)) throw std::invalid_argument("PDE horizon T must be positive");
  if (!(options.c_safe > 0.0 && options.c_safe <= 0.5)) {
    throw std::invalid_argument("c_safe must lie in (0, 0.5]");
  }
  if (options.output_every < 1) throw std::invalid_argument("output_every must be >= 1");
  const double dx = grid.dx();
  const FaceField base = face_field(field, grid);
  const double maxD = coeffs.max_D();
  if (!(maxD > 0.0)) throw NumericalGuardError("diffusion coefficient vanishes");
  double dt_max = options.c_safe * dx * dx / (grid.d * maxD);
  double max_e = 0.0;
  for (const auto& v : base.axis) max_e = std::max(max_e, v.cwiseAbs().maxCoeff());
  const double max_ds = coeffs.max_dsigma();
  const double adv_speed = max_ds * (max_e + options.drift_bound);
  // explicit Euler: the diffusive and advective rates add
  if (adv_speed > 0.0) {
    dt_max = options.c_safe / (grid.d * maxD / (dx * dx) + adv_speed / dx);
  }
  const long steps = static_cast<long>(std::ceil(options.T / dt_max - 1e-9));
  const double dt = options.T / steps;

  HydroSolution out;
  SolveReport& rep = out.report;
  rep.M = grid.M;
  rep.d = grid.d;
  rep.dt = dt;
  rep.cfl = dt * grid.d * maxD / (dx * dx);
  out.path.grid = grid;
  Eigen::VectorXd rho = initial.values();
  const double mass0 = rho.mean();
  rep.min_value = rho.minCoeff();
  rep.max_value = rho.maxCoeff();
  out.path.times.push_back(0.0);
  out.path.slices.push_back(rho);

  FaceField E = base;
  FaceField add = FaceField::zero(grid);
  FaceField flux = FaceField::zero(grid);
  FluxStats stats;
  const double cell = grid.cell_volume();
  for (long n = 0; n < steps; ++n) {
    const double t = n * dt;
    if (extra) {
      for (auto& v : add.axis) v.setZero();
      extra(t, add);
      for (int a = 0; a < grid.d; ++a) E.axis[a] = base.axis[a] + add.axis[a];
      double me = 0.0;
      for (const auto& v : E.axis) me = std::max(me, v.cwiseAbs().maxCoeff());
      if (max_ds * me * dt > dx) {
        throw NumericalGuardError("advective CFL violated by the extra drift at t = " +
                                  fmt_double(t) + "; raise SolveOptions::drift_bound");
      }
    }
    face_fluxes(grid, rho, E, coeffs, flux, &stats);
    double energy = 0.0;
    for (int a = 0; a < grid.d; ++a) {
      for (int c = 0; c < grid.cells(); ++c) {
        const double g = (rho[grid.neighbor(c, a, 1)] - rho[c]) / dx;
        energy += g * g;
      }
    }
    rep.dirichlet_energy += energy * cell * dt;
    rho -= dt * flux_divergence(grid, flux);
    const double lo = rho.minCoeff();
    const double hi = rho.maxCoeff();
    if (lo < -1e-12 || hi > 1.0 + 1e-12 || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw NumericalGuardError("density left [0,1] at t = " + fmt_double(t + dt) +
                                " (min " + fmt_double(lo) + ", max " + fmt_double(hi) + ")");
    }
    rep.min_value = std::min(rep.min_value, lo);
    rep.max_value = std::max(rep.max_value, hi);
    rep.mass_drift = std::max(rep.mass_drift, std::abs(rho.mean() - mass0));
    const bool last = n + 1 == steps;
    if ((n + 1) % options.output_every == 0 || last) {
      out.path.times.push_back((n + 1) * dt);
      out.path.slices.push_back(rho);
      if (!last && options.stop && options.stop((n + 1) * dt, rho)) {
        rep.steps = n + 1;
        rep.stopped_early = true;
        rep.limiter_activations = stats.limiter_activations;
        return out;
      }
    }
  }
  rep.steps = steps;
  rep.limiter_activations = stats.limiter_activations;
  return out;
}

HydroSolution solve_adjoint(const DensityField& initial, const FieldSpec& field,
                            const Coefficients& coeffs, const SolveOptions& options) {
  return solve_hydro(initial, field.adjoint(), coeffs, options);
}

DensityField stationary_profile(double rhobar, const FieldSpec& field,
                                const ThermoTable& thermo, const Grid& grid) {
  if (rhobar < 0.0 || rhobar > 1.0) throw std::invalid_argument("rhobar must lie in [0,1]");
  if (rhobar == 0.0 || rhobar == 1.0 || field.potential().is_flat()) {
    return DensityField::constant(grid, rhobar);
  }
  Eigen::VectorXd u(grid.cells());
  for (int c = 0; c < grid.cells(); ++c) {
    const auto r = grid.center(c);
    u[c] = field.U(std::span<const double>(r.data(), grid.d));
  }
  auto profile = [&](double alpha) {
    Eigen::VectorXd g(grid.cells());
    for (int c = 0; c < grid.cells(); ++c) g[c] = thermo.inverse_fprime(alpha - u[c]);
    return g;
  };
  const double centre = thermo.chemical_potential(std::clamp(rhobar, thermo.rho_min(), thermo.rho_max())) +
                        u.mean();
  double lo = centre - 1.0;
  double hi = centre + 1.0;
  for (int it = 0; it < 60 && profile(lo).mean() > rhobar; ++it) lo -= (hi - lo);
  for (int it = 0; it < 60 && profile(hi).mean() < rhobar; ++it) hi += (hi - lo);
  if (!(profile(lo).mean() <= rhobar && profile(hi).mean() >= rhobar)) {
    throw NumericalGuardError("stationary profile: mass bisection does not bracket");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (profile(mid).mean() < rhobar) lo = mid; else hi = mid;
  }
  return DensityField(grid, profile(0.5 * (lo + hi)));
}

Eigen::VectorXd time_derivative(const Path& path, int k) {
  const int m = path.size();
  if (m < 2) throw std::invalid_argument("time derivative needs at least two slices");
  const auto& t = path.times;
  const auto& s = path.slices;
  if (m == 2) return (s[1] - s[0]) / (t[1] - t[0]);
  if (k == 0) {
    const double h1 = t[1] - t[0];
    const double h2 = t[2] - t[1];
    return -(2 * h1 + h2) / (h1 * (h1 + h2)) * s[0] + (h1 + h2) / (h1 * h2) * s[1] -
           h1 / (h2 * (h1 + h2)) * s[2];
  }
  if (k == m - 1) {
    const double h1 = t[m - 1] - t[m - 2];
    const double h2 = t[m - 2] - t[m - 3];
    return (2 * h1 + h2) / (h1 * (h1 + h2)) * s[m - 1] - (h1 + h2) / (h1 * h2) * s[m - 2] +
           h1 / (h2 * (h1 + h2)) * s[m - 3];
  }
  const double h1 = t[k] - t[k - 1];
  const double h2 = t[k + 1] - t[k];
  return -h2 / (h1 * (h1 + h2)) * s[k - 1] + (h2 - h1) / (h1 * h2) * s[k] +
         h1 / (h2 * (h1 + h2)) * s[k + 1];
}

std::vector<double> trapezoid_weights(const std::vector<double>& times) {
  const std::size_t m = times.size();
  std::vector<double> w(m, 0.0);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double h = times[k + 1] - times[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

Eigen::VectorXd pde_residual(const Path& path, int k, const FaceField& E,
                             const Coefficients& coeffs, const FaceField* extra) {
  FaceField flux;
  if (extra != nullptr) {
    FaceField total = E;
    total += *extra;
    face_fluxes(path.grid, path.slices[k], total, coeffs, flux);
  } else {
    face_fluxes(path.grid, path.slices[k], E, coeffs, flux);
  }
  return time_derivative(path, k) + flux_divergence(path.grid, flux);
}

Eigen::VectorXd pde_residual(const Path& path, int k, const FieldSpec& field,
                             const Coefficients& coeffs) {
  if (k <= 0 || k >= path.size() - 1) {
    throw std::invalid_argument("pde_residual: slice must be an interior output time");
  }
  return pde_residual(path, k, face_field(field, path.grid), coeffs);
}

}  // namespace kawasaki
