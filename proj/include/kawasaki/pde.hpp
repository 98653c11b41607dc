#pragma once

// Explicit conservative finite-volume solvers for the driven diffusion
//   d_t rho + div[sigma(rho) E - D(rho) grad rho] = 0
// on the periodic unit torus (d = 1, 2), its adjoint (time-reversed) flow,
// and the stationary profile of a gradient field.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kawasaki/coarse.hpp"
#include "kawasaki/field.hpp"
#include "kawasaki/gibbs.hpp"
#include "kawasaki/transport.hpp"

namespace kawasaki {

/// Scalar transport coefficients as functions of the density.
struct Coefficients {
  std::function<double(double)> sigma;
  std::function<double(double)> dsigma;
  std::function<double(double)> D;

  /// sigma = rho(1-rho), D = 1.
  static Coefficients ssep();
  /// sigma from the mobility model, D = sigma f'' with f'' read at the
  /// density clamped into the thermo grid (D has finite limits at 0, 1).
  static Coefficients from_models(MobilityModel mobility, const ThermoTable& thermo);

  /// max D over a uniform sample of [0,1].
  double max_D(int samples = 257) const;
  /// max |sigma'| over a uniform sample of [0,1].
  double max_dsigma(int samples = 257) const;
};

/// Values on the faces c + e_a/2 (face index = cell index c), one vector per
/// axis.
struct FaceField {
  std::vector<Eigen::VectorXd> axis;

  static FaceField zero(const Grid& grid);
  FaceField& operator+=(const FaceField& other);
  FaceField scaled(double s) const;
};

/// Line average of E between adjacent cell centres (exact face work / dx).
FaceField face_field(const FieldSpec& field, const Grid& grid);
/// Discrete gradient (h_{c+e} - h_c)/dx of a cell function.
FaceField gradient_faces(const Grid& grid, const Eigen::VectorXd& h);

/// Extra time-dependent face drift added to the field (e.g. grad H_t).
using ExtraDrift = std::function<void(double t, FaceField& add)>;

struct FluxStats {
  long limiter_activations = 0;
};

/// Numerical fluxes: centred sigma(rho_f) E_f - D(rho_f) grad rho with
/// arithmetic-mean face density; where the cell Peclet number
/// max |sigma'| E_f dx / D(rho_f), with sigma' taken over the two cell states
/// and their mean, exceeds 2 the advective part switches to
/// a Rusanov flux on minmod-reconstructed states.
void face_fluxes(const Grid& grid, const Eigen::VectorXd& rho, const FaceField& E,
                 const Coefficients& coeffs, FaceField& flux, FluxStats* stats = nullptr);
/// Cellwise discrete divergence sum_a (F_c - F_{c-e_a}) / dx.
Eigen::VectorXd flux_divergence(const Grid& grid, const FaceField& flux);

struct SolveOptions {
  double T = 1.0;
  double c_safe = 0.4;
  /// Store every n-th step (the final state is always stored).
  int output_every = 1;
  /// Bound on |extra drift| used when choosing dt.
  double drift_bound = 0.0;
  /// Optional early stop, evaluated at stored times.
  std::function<bool(double t, const Eigen::VectorXd& rho)> stop;
};

struct SolveReport {
  int M = 0;
  int d = 1;
  double dt = 0.0;
  long steps = 0;
  double cfl = 0.0;  // dt * d * max D / dx^2
  double mass_drift = 0.0;
  long limiter_activations = 0;
  double min_value = 0.0;
  double max_value = 0.0;
  /// int_0^T sum |grad rho|^2 dx^d dt (discrete Dirichlet energy).
  double dirichlet_energy = 0.0;
  bool stopped_early = false;

  std::string to_json() const;
};

struct HydroSolution {
  Path path;
  SolveReport report;
};

/// Forward Euler in time with dt = T / ceil(T / dt_max), where
/// dt_max = c_safe / (d max D / dx^2 + max|sigma' E| / dx). A cell leaving [0,1] throws
/// NumericalGuardError (values are never clipped).
HydroSolution solve_hydro(const DensityField& initial, const FieldSpec& field,
                          const Coefficients& coeffs, const SolveOptions& options,
                          const ExtraDrift& extra = {});

/// Same scheme with the adjoint field -grad U - Etilde.
HydroSolution solve_adjoint(const DensityField& initial, const FieldSpec& field,
                            const Coefficients& coeffs, const SolveOptions& options);

/// gamma(r) = (f')^{-1}(alpha - U(r)) at cell centres, alpha chosen by
/// bisection so that the mean equals rhobar.
DensityField stationary_profile(double rhobar, const FieldSpec& field,
                                const ThermoTable& thermo, const Grid& grid);

/// r = d_t pi + div[sigma E - D grad pi] at slice k: centred time difference
/// on interior slices, second-order one-sided at the two ends.
Eigen::VectorXd pde_residual(const Path& path, int k, const FaceField& E,
                             const Coefficients& coeffs, const FaceField* extra = nullptr);
/// Convenience: interior slices only, as a validation entry point.
Eigen::VectorXd pde_residual(const Path& path, int k, const FieldSpec& field,
                             const Coefficients& coeffs);

/// Time derivative estimate of slice k (same stencil as pde_residual).
Eigen::VectorXd time_derivative(const Path& path, int k);

/// Trapezoid weights of the path times.
std::vector<double> trapezoid_weights(const std::vector<double>& times);

}  // namespace kawasaki
