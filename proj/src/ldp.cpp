#include "kawasaki/ldp.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kawasaki/errors.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

namespace {

constexpr double kDegenerateSigma = 1e-12;
constexpr double kHarmlessResidual = 1e-10;

double face_energy(const Grid& grid, const FaceField& sigma, const Eigen::VectorXd& psi) {
  double e = 0.0;
  for (int a = 0; a < grid.d; ++a) {
    for (int c = 0; c < grid.cells(); ++c) {
      const double g = (psi[grid.neighbor(c, a, 1)] - psi[c]) * grid.M;
      e += sigma.axis[a][c] * g * g;
    }
  }
  return e * grid.cell_volume();
}

// -2 div(sigma grad psi)
Eigen::VectorXd apply_operator(const Grid& grid, const FaceField& sigma,
                               const Eigen::VectorXd& psi) {
  FaceField flux = gradient_faces(grid, psi);
  for (int a = 0; a < grid.d; ++a) flux.axis[a] = flux.axis[a].cwiseProduct(sigma.axis[a]);
  return -2.0 * flux_divergence(grid, flux);
}

std::string json_array(const std::vector<double>& v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fmt_double(v[i]);
  os << ']';
  return os.str();
}

std::string json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  if (std::isnan(v)) return "\"nan\"";
  return fmt_double(v);
}

}  // namespace

FaceField face_mobility(const Grid& grid, const Eigen::VectorXd& rho,
                        const Coefficients& coeffs) {
  FaceField s = FaceField::zero(grid);
  for (int a = 0; a < grid.d; ++a) {
    for (int c = 0; c < grid.cells(); ++c) {
      s.axis[a][c] = coeffs.sigma(0.5 * (rho[c] + rho[grid.neighbor(c, a, 1)]));
    }
  }
  return s;
}

EllipticSolution solve_weighted_poisson(const Grid& grid, const FaceField& sigma,
                                        const Eigen::VectorXd& r, double tolerance,
                                        const Eigen::VectorXd* guess) {
  EllipticSolution out;
  const int n = grid.cells();
  const double dx = grid.dx();
  if (grid.d == 1) {
    // G_c = sigma_c (psi_{c+1} - psi_c)/dx satisfies -2 (G_c - G_{c-1})/dx = r_c.
    Eigen::VectorXd S(n);
    double acc = 0.0;
    for (int c = 0; c < n; ++c) {
      acc += r[c];
      S[c] = 0.5 * dx * acc;
    }
    double num = 0.0;
    double den = 0.0;
    for (int c = 0; c < n; ++c) {
      num += S[c] / sigma.axis[0][c];
      den += 1.0 / sigma.axis[0][c];
    }
    const double K = num / den;  // periodicity: sum of increments of psi is zero
    out.psi.resize(n);
    out.psi[0] = 0.0;
    for (int c = 0; c + 1 < n; ++c) {
      out.psi[c + 1] = out.psi[c] + dx * (K - S[c]) / sigma.axis[0][c];
    }
  } else {
    using SpMat = Eigen::SparseMatrix<double>;
    // Unknowns are cells 1..n-1; cell 0 is pinned to zero.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (2 * grid.d + 1));
    const double scale = 2.0 / (dx * dx);
    for (int c = 1; c < n; ++c) {
      double diag = 0.0;
      for (int a = 0; a < grid.d; ++a) {
        const int up = grid.neighbor(c, a, 1);
        const int down = grid.neighbor(c, a, -1);
        const double su = scale * sigma.axis[a][c];
        const double sd = scale * sigma.axis[a][down];
        diag += su + sd;
        if (up != 0) trip.emplace_back(c - 1, up - 1, -su);
        if (down != 0) trip.emplace_back(c - 1, down - 1, -sd);
      }
      trip.emplace_back(c - 1, c - 1, diag);
    }
    SpMat A(n - 1, n - 1);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(tolerance);
    cg.setMaxIterations(20 * n);
    cg.compute(A);
    const Eigen::VectorXd rhs = r.tail(n - 1);
    Eigen::VectorXd x;
    if (guess != nullptr && guess->size() == n) {
      const Eigen::VectorXd g0 = guess->tail(n - 1).array() - (*guess)[0];
      x = cg.solveWithGuess(rhs, g0);
    } else {
      x = cg.solve(rhs);
    }
    if (cg.info() != Eigen::Success) {
      throw NumericalGuardError("conjugate gradients did not converge (error " +
                                fmt_double(cg.error()) + ")");
    }
    out.iterations = static_cast<int>(cg.iterations());
    out.psi.resize(n);
    out.psi[0] = 0.0;
    out.psi.tail(n - 1) = x;
  }
  out.psi.array() -= out.psi.mean();
  out.residual = (apply_operator(grid, sigma, out.psi) - r).cwiseAbs().maxCoeff();
  out.energy = face_energy(grid, sigma, out.psi);
  return out;
}

std::string RateEval::to_json() const {
  std::ostringstream os;
  os << "{\"value\": " << json_number(value)
     << ", \"mass_conserving\": " << (mass_conserving ? "true" : "false")
     << ", \"diagnostic\": \"" << diagnostic << "\", \"grid\": {\"d\": " << d
     << ", \"M\": " << M << "}, \"slices\": " << slice_values.size()
     << ", \"times\": " << json_array(times)
     << ", \"slice_values\": " << json_array(slice_values)
     << ", \"elliptic_residuals\": " << json_array(elliptic_residuals)
     << ", \"mean_residuals\": " << json_array(mean_residuals) << "}";
  return os.str();
}

RateEval rate_functional(const Path& path, const FieldSpec& field,
                         const Coefficients& coeffs, const RateOptions& options) {
  RateEval out;
  const Grid& grid = path.grid;
  out.M = grid.M;
  out.d = grid.d;
  out.times = path.times;
  if (path.size() < 2) throw std::invalid_argument("rate functional needs >= 2 slices");
  for (const auto& s : path.slices) {
    if (s.minCoeff() < -1e-12 || s.maxCoeff() > 1.0 + 1e-12) {
      throw std::invalid_argument("path slice outside [0,1]");
    }
  }
  const double m0 = path.slices[0].mean();
  for (const auto& s : path.slices) {
    if (std::abs(s.mean() - m0) > options.mass_tolerance) {
      out.value = kInfinity;
      out.mass_conserving = false;
      out.diagnostic = "path does not conserve mass (drift " +
                       fmt_double(std::abs(s.mean() - m0)) + ")";
      return out;
    }
  }
  if (options.gamma != nullptr) {
    const double gap = (path.slices[0] - options.gamma->values()).cwiseAbs().maxCoeff();
    if (gap > options.start_tolerance) {
      out.value = kInfinity;
      out.diagnostic = "path does not start at the stationary profile (sup gap " +
                       fmt_double(gap) + ")";
      return out;
    }
  }
  const FaceField E = face_field(field, grid);
  const std::vector<double> w = trapezoid_weights(path.times);
  Eigen::VectorXd prev;
  double total = 0.0;
  for (int k = 0; k < path.size(); ++k) {
    Eigen::VectorXd r = pde_residual(path, k, E, coeffs);
    const double scale = 1.0 + r.cwiseAbs().maxCoeff();
    const double mean = r.mean();
    out.mean_residuals.push_back(mean / scale);
    if (std::abs(mean) > 1e-9 * scale) {
      throw NumericalGuardError("elliptic solvability violated: mean residual " +
                                fmt_double(mean));
    }
    r.array() -= mean;
    const FaceField sigma = face_mobility(grid, path.slices[k], coeffs);
    double smin = kInfinity;
    for (const auto& v : sigma.axis) smin = std::min(smin, v.minCoeff());
    if (smin < kDegenerateSigma) {
      if (r.cwiseAbs().maxCoeff() > kHarmlessResidual) {
        out.value = kInfinity;
        out.diagnostic = "degenerate mobility with nonzero residual at t = " +
                         fmt_double(path.times[k]);
        return out;
      }
      out.slice_values.push_back(0.0);
      out.elliptic_residuals.push_back(0.0);
      if (options.keep_potentials) out.potentials.push_back(Eigen::VectorXd::Zero(grid.cells()));
      continue;
    }
    const EllipticSolution sol = solve_weighted_poisson(
        grid, sigma, r, options.cg_tolerance, prev.size() > 0 ? &prev : nullptr);
    out.slice_values.push_back(sol.energy);
    out.elliptic_residuals.push_back(sol.residual);
    total += w[k] * sol.energy;
    prev = sol.psi;
    if (options.keep_potentials) out.potentials.push_back(sol.psi);
  }
  out.value = total;
  return out;
}

double rate_functional_dual(const Path& path, const FieldSpec& field,
                            const Coefficients& coeffs, int modes) {
  const Grid& grid = path.grid;
  std::vector<Eigen::VectorXd> basis;
  const int side = 2 * modes + 1;
  int wavevectors = 1;
  for (int i = 0; i < grid.d; ++i) wavevectors *= side;
  for (int idx = 0; idx < wavevectors; ++idx) {
    std::array<int, 3> k{};
    int rem = idx;
    bool zero = true;
    for (int i = 0; i < grid.d; ++i) {
      k[i] = rem % side - modes;
      rem /= side;
      zero = zero && k[i] == 0;
    }
    if (zero) continue;
    // keep one representative of +-k
    bool positive = false;
    for (int i = 0; i < grid.d; ++i) {
      if (k[i] != 0) {
        positive = k[i] > 0;
        break;
      }
    }
    if (!positive) continue;
    Eigen::VectorXd cs(grid.cells()), sn(grid.cells());
    for (int c = 0; c < grid.cells(); ++c) {
      const auto r = grid.center(c);
      double ph = 0.0;
      for (int i = 0; i < grid.d; ++i) ph += k[i] * r[i];
      ph *= 2.0 * std::numbers::pi;
      cs[c] = std::cos(ph);
      sn[c] = std::sin(ph);
    }
    basis.push_back(cs);
    basis.push_back(sn);
  }
  const int nb = static_cast<int>(basis.size());
  std::vector<FaceField> grads;
  for (const auto& phi : basis) grads.push_back(gradient_faces(grid, phi));
  const FaceField E = face_field(field, grid);
  const std::vector<double> w = trapezoid_weights(path.times);
  const double vol = grid.cell_volume();
  double total = 0.0;
  for (int k = 0; k < path.size(); ++k) {
    const Eigen::VectorXd r = pde_residual(path, k, E, coeffs);
    const FaceField sigma = face_mobility(grid, path.slices[k], coeffs);
    Eigen::VectorXd b(nb);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nb, nb);
    for (int j = 0; j < nb; ++j) b[j] = vol * r.dot(basis[j]);
    for (int j = 0; j < nb; ++j) {
      for (int l = j; l < nb; ++l) {
        double acc = 0.0;
        for (int a = 0; a < grid.d; ++a) {
          acc += (grads[j].axis[a].cwiseProduct(sigma.axis[a])).dot(grads[l].axis[a]);
        }
        A(j, l) = A(l, j) = vol * acc;
      }
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    total += w[k] * 0.25 * b.dot(ldlt.solve(b));
  }
  return total;
}

double quasi_potential(const DensityField& rho, const DensityField& gamma,
                       const ThermoTable& thermo, double mass_tolerance) {
  if (!(rho.grid() == gamma.grid())) throw std::invalid_argument("grid mismatch");
  if (std::abs(rho.mass() - gamma.mass()) > mass_tolerance) return kInfinity;
  double acc = 0.0;
  for (int c = 0; c < rho.grid().cells(); ++c) acc += thermo.excess(rho[c], gamma[c]);
  return acc * rho.grid().cell_volume();
}

double quasi_potential(const DensityField& rho, double rhobar, const FieldSpec& field,
                       const ThermoTable& thermo, double mass_tolerance) {
  if (std::abs(rho.mass() - rhobar) > mass_tolerance) return kInfinity;
  const DensityField gamma = stationary_profile(rhobar, field, thermo, rho.grid());
  return quasi_potential(rho, gamma, thermo, mass_tolerance);
}

double energy_Q(const Path& path) {
  const std::vector<double> w = trapezoid_weights(path.times);
  const Grid& grid = path.grid;
  FaceField unit = FaceField::zero(grid);
  for (auto& v : unit.axis) v.setOnes();
  double total = 0.0;
  for (int k = 0; k < path.size(); ++k) total += w[k] * face_energy(grid, unit, path.slices[k]);
  return total;
}

DualityReport duality_defect(const Path& path, const FieldSpec& field,
                             const Coefficients& coeffs, const ThermoTable& thermo,
                             const DensityField& gamma) {
  DualityReport rep;
  const RateEval fwd = rate_functional(path, field, coeffs);
  const RateEval rev = rate_functional(time_reversed(path), field.adjoint(), coeffs);
  if (!fwd.finite() || !rev.finite()) {
    throw NumericalGuardError("duality: rate functional is infinite (" + fwd.diagnostic +
                              rev.diagnostic + ")");
  }
  rep.I_forward = fwd.value;
  rep.I_reversed = rev.value;
  rep.F_start = quasi_potential(path.at(0), gamma, thermo);
  rep.F_end = quasi_potential(path.at(path.size() - 1), gamma, thermo);
  rep.defect = std::abs(rep.I_forward - (rep.F_end - rep.F_start + rep.I_reversed));
  return rep;
}

namespace {

Eigen::VectorXd chemical_gap(const Eigen::VectorXd& rho, const DensityField& gamma,
                             const ThermoTable& thermo) {
  Eigen::VectorXd G(rho.size());
  for (Eigen::Index c = 0; c < rho.size(); ++c) {
    if (rho[c] < thermo.rho_min() || rho[c] > thermo.rho_max()) {
      throw NumericalGuardError("density " + fmt_double(rho[c]) +
                                " outside the thermo grid (f' diverges)");
    }
    G[c] = thermo.fprime(rho[c]) - thermo.fprime(gamma[static_cast<int>(c)]);
  }
  return G;
}

}  // namespace

LyapunovSeries lyapunov_series(const Path& path, const FieldSpec& field,
                               const Coefficients& coeffs, const ThermoTable& thermo,
                               const DensityField& gamma) {
  (void)field;
  LyapunovSeries out;
  const Grid& grid = path.grid;
  out.times = path.times;
  for (int k = 0; k < path.size(); ++k) {
    const Eigen::VectorXd G = chemical_gap(path.slices[k], gamma, thermo);
    out.F.push_back(quasi_potential(path.at(k), gamma, thermo, kInfinity));
    out.dissipation.push_back(
        face_energy(grid, face_mobility(grid, path.slices[k], coeffs), G));
  }
  const int m = path.size();
  for (int k = 0; k < m; ++k) {
    double dF = 0.0;
    if (m >= 3) {
      // Same three-point stencils as the path time derivative.
      const auto& t = path.times;
      const auto& F = out.F;
      if (k == 0) {
        const double h1 = t[1] - t[0], h2 = t[2] - t[1];
        dF = -(2 * h1 + h2) / (h1 * (h1 + h2)) * F[0] + (h1 + h2) / (h1 * h2) * F[1] -
             h1 / (h2 * (h1 + h2)) * F[2];
      } else if (k == m - 1) {
        const double h1 = t[m - 1] - t[m - 2], h2 = t[m - 2] - t[m - 3];
        dF = (2 * h1 + h2) / (h1 * (h1 + h2)) * F[m - 1] - (h1 + h2) / (h1 * h2) * F[m - 2] +
             h1 / (h2 * (h1 + h2)) * F[m - 3];
      } else {
        const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
        dF = -h2 / (h1 * (h1 + h2)) * F[k - 1] + (h2 - h1) / (h1 * h2) * F[k] +
             h1 / (h2 * (h1 + h2)) * F[k + 1];
      }
    } else if (m == 2) {
      dF = (out.F[1] - out.F[0]) / (path.times[1] - path.times[0]);
    }
    out.dFdt.push_back(dF);
    out.defect.push_back(std::abs(dF + out.dissipation[k]));
    if (k > 0 && k < m - 1) out.max_defect = std::max(out.max_defect, out.defect.back());
    if (k + 1 < m) out.max_increase = std::max(out.max_increase, out.F[k + 1] - out.F[k]);
  }
  if (m <= 2) {
    for (double v : out.defect) out.max_defect = std::max(out.max_defect, v);
  }
  return out;
}

double orthogonality_defect(const DensityField& rho, const FieldSpec& field,
                            const Coefficients& coeffs, const ThermoTable& thermo,
                            const DensityField& gamma) {
  const Grid& grid = rho.grid();
  const Eigen::VectorXd G = chemical_gap(rho.values(), gamma, thermo);
  FaceField flux;
  face_fluxes(grid, rho.values(), face_field(field, grid), coeffs, flux);
  const double lhs = grid.cell_volume() * flux_divergence(grid, flux).dot(G);
  const double rhs = face_energy(grid, face_mobility(grid, rho.values(), coeffs), G);
  return lhs - rhs;
}

std::string ExitPlan::to_json() const {
  std::ostringstream os;
  os << "{\"quasi_potential\": " << json_number(quasi_potential)
     << ", \"rate_functional\": " << json_number(rate.value)
     << ", \"relative_gap\": " << json_number(relative_gap)
     << ", \"horizon\": " << fmt_double(horizon)
     << ", \"achieved_distance\": " << fmt_double(achieved_distance)
     << ", \"converged\": " << (converged ? "true" : "false")
     << ", \"slices\": " << path.size() << ", \"grid\": {\"d\": " << path.grid.d
     << ", \"M\": " << path.grid.M << "}, \"rate\": " << rate.to_json() << "}";
  return os.str();
}

ExitPlan optimal_exit_path(const DensityField& target, double rhobar,
                           const FieldSpec& field, const Coefficients& coeffs,
                           const ThermoTable& thermo, const ExitOptions& options) {
  if (std::abs(target.mass() - rhobar) > 1e-8) {
    throw std::invalid_argument("exit target must have mass rhobar");
  }
  ExitPlan plan;
  plan.target = target;
  const Grid& grid = target.grid();
  plan.gamma = stationary_profile(rhobar, field, thermo, grid);
  plan.quasi_potential = quasi_potential(target, plan.gamma, thermo);
  const double d0 = l2_distance(grid, target.values(), plan.gamma.values());
  if (d0 <= options.tolerance) {
    plan.path.grid = grid;
    plan.path.times = {0.0, 1.0};
    plan.path.slices = {target.values(), target.values()};
    plan.achieved_distance = d0;
    plan.converged = true;
    plan.rate.value = 0.0;
    plan.rate.M = grid.M;
    plan.rate.d = grid.d;
    return plan;
  }
  double checkpoint_t = 0.0;
  double checkpoint_d = d0;
  double last_d = d0;
  bool met = false;
  SolveOptions so;
  so.T = options.max_horizon;
  so.c_safe = options.c_safe;
  so.output_every = options.output_every;
  so.stop = [&](double t, const Eigen::VectorXd& v) {
    last_d = l2_distance(grid, v, plan.gamma.values());
    if (last_d <= options.tolerance) {
      met = true;
      return true;
    }
    if (t - checkpoint_t >= options.stagnation_window) {
      const bool stuck = last_d > options.stagnation_factor * checkpoint_d;
      checkpoint_t = t;
      checkpoint_d = last_d;
      return stuck;
    }
    return false;
  };
  const HydroSolution relax = solve_adjoint(target, field, coeffs, so);
  plan.horizon = relax.path.times.back();
  plan.achieved_distance =
      l2_distance(grid, relax.path.slices.back(), plan.gamma.values());
  plan.converged = met || plan.achieved_distance <= options.tolerance;
  plan.path = time_reversed(relax.path);
  RateOptions ro;
  ro.gamma = &plan.gamma;
  plan.rate = rate_functional(plan.path, field, coeffs, ro);
  plan.relative_gap = plan.quasi_potential > 0.0
                          ? std::abs(plan.rate.value - plan.quasi_potential) / plan.quasi_potential
                          : std::abs(plan.rate.value);
  return plan;
}

ControlledField controlled_field(const Path& target, const FieldSpec& field,
                                 const Coefficients& coeffs) {
  RateOptions ro;
  ro.keep_potentials = true;
  ControlledField out;
  out.eval = rate_functional(target, field, coeffs, ro);
  if (!out.eval.finite()) {
    throw NumericalGuardError("controlled field: " + out.eval.diagnostic);
  }
  out.grid = target.grid;
  out.times = target.times;
  const FaceField E = face_field(field, target.grid);
  for (const auto& psi : out.eval.potentials) {
    Eigen::VectorXd H = 2.0 * psi;
    FaceField f = gradient_faces(target.grid, H);
    f += E;
    out.faces.push_back(std::move(f));
    out.potential.push_back(std::move(H));
  }
  return out;
}

ExtraDrift controlled_drift(const ControlledField& control) {
  auto grads = std::make_shared<std::vector<FaceField>>();
  for (const auto& H : control.potential) grads->push_back(gradient_faces(control.grid, H));
  auto times = std::make_shared<std::vector<double>>(control.times);
  return [grads, times](double t, FaceField& add) {
    const auto& ts = *times;
    std::size_t k = 0;
    double lam = 0.0;
    if (t <= ts.front()) {
      k = 0;
    } else if (t >= ts.back()) {
      k = ts.size() - 1;
    } else {
      k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
      lam = (t - ts[k]) / (ts[k + 1] - ts[k]);
    }
    for (std::size_t a = 0; a < add.axis.size(); ++a) {
      add.axis[a] += (1.0 - lam) * (*grads)[k].axis[a];
      if (lam > 0.0) add.axis[a] += lam * (*grads)[k + 1].axis[a];
    }
  };
}

double controlled_drift_bound(const ControlledField& control) {
  double top = 0.0;
  for (const auto& H : control.potential) {
    const FaceField g = gradient_faces(control.grid, H);
    for (const auto& v : g.axis) top = std::max(top, v.cwiseAbs().maxCoeff());
  }
  return top;
}

std::shared_ptr<SampledSitePotential> controlled_site_potential(
    const ControlledField& control, const Torus& torus, int stride) {
  if (torus.dim() != control.grid.d) throw std::invalid_argument("dimension mismatch");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  const int m = static_cast<int>(control.times.size());
  std::vector<std::array<double, 3>> pos(torus.num_sites());
  for (int x = 0; x < torus.num_sites(); ++x) {
    const Coords c = torus.coords(x);
    for (int i = 0; i < torus.dim(); ++i) pos[x][i] = (c[i] + 0.5) / torus.side();
  }
  for (int k = 0; k < m; k += stride) {
    const int kk = (k + stride >= m) ? m - 1 : k;
    Eigen::VectorXd v(torus.num_sites());
    for (int x = 0; x < torus.num_sites(); ++x) {
      v[x] = interpolate_periodic(control.grid, control.potential[kk],
                                  std::span<const double>(pos[x].data(), torus.dim()));
    }
    times.push_back(control.times[kk]);
    values.push_back(std::move(v));
    if (kk == m - 1) break;
  }
  return std::make_shared<SampledSitePotential>(torus, std::move(times), std::move(values));
}

}  // namespace kawasaki
