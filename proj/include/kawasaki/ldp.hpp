#pragma once

// Large-deviation functionals on discrete paths: the dynamical rate
// functional through weighted periodic elliptic solves, the quasi-potential,
// the energy functional, time-reversal duality, Lyapunov decay, optimal exit
// paths and the control field that produces a prescribed fluctuation.

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "kawasaki/coarse.hpp"
#include "kawasaki/dynamics.hpp"
#include "kawasaki/field.hpp"
#include "kawasaki/gibbs.hpp"
#include "kawasaki/pde.hpp"

namespace kawasaki {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Solution of -2 div(sigma_f grad Psi) = r on the periodic grid, Psi with
/// zero mean. 1-D: two explicit integrations; 2-D: conjugate gradients on
/// the system with one cell pinned.
struct EllipticSolution {
  Eigen::VectorXd psi;
  double residual = 0.0;  // max |-2 div(sigma grad psi) - r|
  int iterations = 0;
  /// sum_faces dx^d sigma_f (grad psi)^2
  double energy = 0.0;
};

EllipticSolution solve_weighted_poisson(const Grid& grid, const FaceField& sigma_faces,
                                        const Eigen::VectorXd& r, double tolerance = 1e-10,
                                        const Eigen::VectorXd* guess = nullptr);

/// sigma at the arithmetic-mean face densities.
FaceField face_mobility(const Grid& grid, const Eigen::VectorXd& rho,
                        const Coefficients& coeffs);

struct RateOptions {
  /// Required start profile; nullptr skips the initial-condition check.
  const DensityField* gamma = nullptr;
  /// Sup-norm tolerance for the start check.
  double start_tolerance = 1e-3;
  /// Mass drift tolerance along the path.
  double mass_tolerance = 1e-10;
  double cg_tolerance = 1e-10;
  bool keep_potentials = false;
};

struct RateEval {
  double value = 0.0;  // +infinity sentinel when the path is not admissible
  bool mass_conserving = true;
  std::string diagnostic;
  std::vector<double> times;
  std::vector<double> slice_values;        // <grad Psi_t, sigma grad Psi_t>
  std::vector<double> elliptic_residuals;  // per-slice solver residual
  std::vector<double> mean_residuals;      // mean r_t / scale before projection
  std::vector<Eigen::VectorXd> potentials; // Psi_t when requested
  int M = 0;
  int d = 1;

  bool finite() const { return value < kInfinity; }
  std::string to_json() const;
};

/// I(pi) = int dt <grad Psi_t, sigma(pi_t) grad Psi_t> with
/// -2 div(sigma grad Psi_t) = d_t pi + div[sigma E - D grad pi]. All slices
/// enter with trapezoid weights; the end slices use one-sided second-order
/// time differences.
RateEval rate_functional(const Path& path, const FieldSpec& field,
                         const Coefficients& coeffs, const RateOptions& options = {});

/// Lower bound from the supremum over a finite Fourier test basis with
/// wavenumbers |k_i| <= modes: sum_t w_t (1/4) b^T A^{-1} b.
double rate_functional_dual(const Path& path, const FieldSpec& field,
                            const Coefficients& coeffs, int modes);

/// F^U(rho) = int f_{gamma(r)}(rho(r)) dr by midpoint quadrature; +infinity
/// when |mass(rho) - rhobar| > mass_tolerance.
double quasi_potential(const DensityField& rho, double rhobar, const FieldSpec& field,
                       const ThermoTable& thermo, double mass_tolerance = 1e-8);
/// Same with the stationary profile supplied.
double quasi_potential(const DensityField& rho, const DensityField& gamma,
                       const ThermoTable& thermo, double mass_tolerance = 1e-8);

/// Q(pi) = int dt sum |grad pi_t|^2 dx^d with the solver's gradient stencil.
double energy_Q(const Path& path);

struct DualityReport {
  double I_forward = 0.0;   // I^{E}(pi)
  double I_reversed = 0.0;  // I^{adjoint E}(theta pi)
  double F_start = 0.0;     // F^U(pi at the first time)
  double F_end = 0.0;       // F^U(pi at the last time)
  double defect = 0.0;
};

/// |I^E(pi) - [F(pi_end) - F(pi_start) + I^{E*}(theta pi)]| for a path on a
/// bounded interval (no initial-condition check).
DualityReport duality_defect(const Path& path, const FieldSpec& field,
                             const Coefficients& coeffs, const ThermoTable& thermo,
                             const DensityField& gamma);

struct LyapunovSeries {
  std::vector<double> times;
  std::vector<double> F;
  std::vector<double> dissipation;  // <grad G, sigma grad G>
  std::vector<double> dFdt;         // time-difference estimate
  std::vector<double> defect;       // |dF/dt + dissipation|
  double max_defect = 0.0;
  double max_increase = 0.0;  // largest F(t_{k+1}) - F(t_k)
};

/// Throws NumericalGuardError when a slice leaves the thermo grid (f'
/// diverges at 0 and 1).
LyapunovSeries lyapunov_series(const Path& path, const FieldSpec& field,
                               const Coefficients& coeffs, const ThermoTable& thermo,
                               const DensityField& gamma);

/// <div[sigma E - D grad rho], G> - <grad G, sigma grad G>, G = f'(rho) - f'(gamma).
double orthogonality_defect(const DensityField& rho, const FieldSpec& field,
                            const Coefficients& coeffs, const ThermoTable& thermo,
                            const DensityField& gamma);

struct ExitOptions {
  double tolerance = 1e-4;  // L2 distance to gamma ending the relaxation
  double max_horizon = 10.0;
  int output_every = 1;
  double c_safe = 0.4;
  /// Relaxation also ends when the distance shrinks by less than this
  /// factor over stagnation_window (the discrete fixed point is reached).
  double stagnation_factor = 0.999;
  double stagnation_window = 0.01;
};

struct ExitPlan {
  DensityField target;
  DensityField gamma;
  Path path;  // theta v, from near gamma to the target
  double quasi_potential = 0.0;
  double horizon = 0.0;
  double achieved_distance = 0.0;
  bool converged = false;  // tolerance met (not just stagnation)
  RateEval rate;
  double relative_gap = 0.0;  // |I(theta v) - F| / F

  std::string to_json() const;
};

/// Relax the target under the adjoint flow to gamma and reverse time.
ExitPlan optimal_exit_path(const DensityField& target, double rhobar,
                           const FieldSpec& field, const Coefficients& coeffs,
                           const ThermoTable& thermo, const ExitOptions& options = {});

struct ControlledField {
  Grid grid;
  std::vector<double> times;
  std::vector<FaceField> faces;           // E + 2 grad Psi_t
  std::vector<Eigen::VectorXd> potential; // H_t = 2 Psi_t on cells
  RateEval eval;
};

/// Driving field that makes the target path a hydrodynamic trajectory.
ControlledField controlled_field(const Path& target, const FieldSpec& field,
                                 const Coefficients& coeffs);

/// Extra drift grad H_t on faces, linear in time between samples.
ExtraDrift controlled_drift(const ControlledField& control);
/// Bound on |grad H_t| over faces and times.
double controlled_drift_bound(const ControlledField& control);

/// H_t sampled at lattice sites (site x at cell centre (x + 1/2)/N,
/// multilinear in space), keeping every `stride`-th time slice.
std::shared_ptr<SampledSitePotential> controlled_site_potential(
    const ControlledField& control, const Torus& torus, int stride = 1);

}  // namespace kawasaki
