#pragma once

// Finite-range lattice-gas Hamiltonians, exact Gibbs measures for tiny
// tori, one-dimensional transfer-matrix thermodynamics and the Legendre
// free energy.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "kawasaki/lattice.hpp"

namespace kawasaki {

/// Where the chemical potential enters the Gibbs weight.
enum class ChemicalPotentialSign {
  /// +lambda * sum(eta) inside H with weight e^{-H}: larger lambda, fewer
  /// particles.
  kHamiltonian,
  /// Weight e^{-H + lambda * sum(eta)}: larger lambda, more particles. The
  /// free energy, f' and mu_rho are always expressed in this form.
  kFugacity,
};

/// Translation-invariant pair interaction
///   H_N(eta) = J * sum over bonds {x,y} of eta_x eta_y,
/// with J = 0 the non-interacting lattice gas.
struct Interaction {
  double coupling = 0.0;
  ChemicalPotentialSign convention = ChemicalPotentialSign::kHamiltonian;

  static Interaction zero() { return {}; }
  static Interaction nearest_neighbor(double J) { return {J}; }

  bool is_zero() const { return coupling == 0.0; }
  /// Interaction range r0 (0 for the free gas).
  int range() const { return is_zero() ? 0 : 1; }
};

/// Full evaluation of H_N (no chemical potential term).
double hamiltonian(const Interaction& interaction, const Torus& torus,
                   const Configuration& config);

/// H_N(eta^{x,y}) - H_N(eta) from the radius-r0 window around the bond.
double energy_diff(const Interaction& interaction, const Torus& torus,
                   const Configuration& config, const Bond& bond);

/// Pressure and its first two derivatives in the fugacity form
/// p_+(lambda) = lim (1/N) log sum exp{-H_N + lambda N_particles}.
struct PressurePoint {
  double p = 0.0;
  double dp = 0.0;   // density rho(lambda)
  double d2p = 0.0;  // compressibility chi(rho(lambda))
};

/// 1-D transfer-matrix pressure for the nearest-neighbour chain, in the
/// convention selected by interaction.convention.
double pressure(const Interaction& interaction, double lambda);

/// Same quantities in fugacity form, from the Perron root of the 2x2
/// transfer matrix.
PressurePoint fugacity_pressure(const Interaction& interaction, double lambda);

/// (1/N^d) log Z_N^lambda by exhaustive enumeration on a tiny torus
/// (finite-N estimate, any d), in the convention of interaction.convention.
double pressure_enumerated(const Interaction& interaction, const Torus& torus,
                           double lambda);

/// Tabulated Legendre free energy f(rho) = sup_lambda {lambda rho - p(lambda)}
/// with f', f'' and chi = 1/f''. Immutable after construction.
class ThermoTable {
 public:
  struct Options {
    int points = 2048;
    double rho_min = 1e-4;
  };

  ThermoTable(const Interaction& interaction, Options options);
  explicit ThermoTable(const Interaction& interaction)
      : ThermoTable(interaction, Options{}) {}

  const Interaction& interaction() const { return interaction_; }
  double rho_min() const { return rho_min_; }
  double rho_max() const { return 1.0 - rho_min_; }

  /// Free energy on [0,1]; exact Legendre evaluation outside the grid.
  double f(double rho) const;
  /// f'(rho) = chemical potential; throws std::out_of_range off the grid.
  double fprime(double rho) const;
  double fsecond(double rho) const;
  /// chi(rho) = 1/f''(rho); chi(0) = chi(1) = 0.
  double chi(double rho) const;
  /// (f')^{-1}(mu), exact, defined for every real mu.
  double inverse_fprime(double mu) const;
  /// Static excess free energy f_rhobar(rho) = f(rho) - f(rhobar) -
  /// f'(rhobar)(rho - rhobar).
  double excess(double rho, double rhobar) const;

  /// Exact Legendre point: lambda(rho) by monotone root find.
  double chemical_potential(double rho) const;

  std::span<const double> rho_grid() const { return rho_; }
  std::span<const double> f_grid() const { return f_; }
  std::span<const double> fprime_grid() const { return fp_; }
  std::span<const double> fsecond_grid() const { return fpp_; }
  std::span<const double> chi_grid() const { return chi_; }

  /// Smallest discrete second difference of f over interior nodes.
  double min_second_difference() const;

  /// C such that 1/C <= chi/(rho(1-rho)) <= C on [lo, hi].
  double chi_bound_constant(double lo = 0.02, double hi = 0.98) const;

  /// CSV with columns rho,f,fprime,fsecond,chi.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t locate(double rho) const;

  Interaction interaction_;
  double rho_min_;
  double h_;
  std::vector<double> rho_, lambda_, f_, fp_, fpp_, chi_;
  std::vector<double> fpp_slope_;  // monotone-cubic node slopes for f''
  std::vector<double> chi_slope_;
};

/// Builds the table and reports non-convexity (a sign-convention bug) as
/// NumericalGuardError.
ThermoTable free_energy_table(const Interaction& interaction,
                              ThermoTable::Options options = {});

/// chi(rho) at the exact Legendre point (no table interpolation), with the
/// limits chi(0) = chi(1) = 0.
double compressibility(const ThermoTable& thermo, double rho);

/// Normalized Boltzmann weights exp{-E_i} (shifted by the minimum).
Eigen::VectorXd boltzmann_weights(std::span<const double> energies);

/// Canonical Gibbs measure on Omega_{N,K}, aligned with enumerate_sector.
/// external_potential, when non-empty, adds sum_x U_x eta_x to H.
Eigen::VectorXd canonical_exact(const Interaction& interaction,
                                const Torus& torus, int K,
                                std::span<const double> external_potential = {});

/// Local observable evaluated on a configuration of a periodic window whose
/// origin is site 0.
using LocalObservable =
    std::function<double(const Torus& window, const Configuration& eta)>;

struct WindowExpectation {
  double value = 0.0;
  /// |value(window) - value(half window)|; zero for the exact product case.
  double truncation_error = 0.0;
  int window_sites = 0;
};

constexpr int kMaxWindowSites = 24;

/// Expectation of a local observable under mu_rho, by exhaustive summation
/// over a periodic window. Exact (Bernoulli product) for zero interaction;
/// for interacting gases the window carries the chemical potential f'(rho)
/// from thermo and the error is estimated against the half-size window.
WindowExpectation product_expectation(const Interaction& interaction,
                                      const LocalObservable& observable,
                                      double rho, const Torus& window,
                                      const ThermoTable* thermo = nullptr);

}  // namespace kawasaki
