#pragma once

// Transport coefficients: kappa, the variational mobility sigma(rho) and the
// diffusion matrix D(rho) = sigma(rho) f''(rho).

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kawasaki/dynamics.hpp"
#include "kawasaki/gibbs.hpp"

namespace kawasaki {

/// kappa^{(i)}(rho) = mu_rho[(eta_0 - eta_{e_i})^2].
double kappa(const Interaction& interaction, double rho, int axis, int d,
             const ThermoTable* thermo = nullptr);

struct MobilityResult {
  Eigen::MatrixXd sigma;     // sigma_k(rho), symmetric d x d
  Eigen::MatrixXd sigma_f0;  // objective at f = 0 (= sigma_0)
  /// Largest eigenvalue of sigma_f0 - sigma_k (gain of the minimisation).
  double improvement = 0.0;
  int support_radius = 0;
  int unknowns = 0;      // number of f-values (2^|Lambda_k|)
  int window_sites = 0;  // sites the integrand depends on
  int rank = 0;          // numerical rank of the f-block
  double condition = 1.0;  // ratio of extreme retained eigenvalues
  bool exact_measure = true;  // false when mu_rho is a windowed approximation
};

/// Largest enumerable window (2^20 configurations).
constexpr int kMaxMobilityWindow = 20;
/// Without interaction the Gram matrix is assembled pairwise over translates,
/// so only the support box size is limited.
constexpr int kMaxProductSupport = 9;

/// Infimum of the mobility variational formula over local f supported on the
/// sup-norm box of radius k, computed as a Schur complement of the Gram
/// matrix of the integrand. Zero interaction uses the exact Bernoulli
/// product measure and the 1-D chain its exact Markov marginal on the window.
/// In d >= 2 with interaction mu_rho is replaced by the free-boundary
/// grand-canonical window measure. Interacting cases require thermo.
MobilityResult mobility_variational(const RateFamily& family,
                                    const Interaction& interaction, double rho,
                                    int support_radius, int d,
                                    const ThermoTable* thermo = nullptr);

/// Scalar mobility model sigma(rho) with derivative, used by the PDE.
class MobilityModel {
 public:
  enum class Kind { kSsep, kVariational, kUser };

  /// sigma = rho(1 - rho).
  static MobilityModel ssep();
  /// User-supplied scalar sigma and sigma'.
  static MobilityModel user(std::function<double(double)> sigma,
                            std::function<double(double)> dsigma);
  /// Variational sigma_k tabulated on `points` uniform nodes of [0,1] and
  /// interpolated by monotone cubics. Uses the (1,1) entry (the models are
  /// isotropic).
  static MobilityModel variational(const RateFamily& family,
                                   const Interaction& interaction,
                                   int support_radius, int points = 65,
                                   const ThermoTable* thermo = nullptr);

  Kind kind() const { return kind_; }
  double sigma(double rho) const;
  double dsigma(double rho) const;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& table() const { return table_; }

 private:
  Kind kind_ = Kind::kSsep;
  std::function<double(double)> sigma_fn_;
  std::function<double(double)> dsigma_fn_;
  std::vector<double> grid_, table_, slopes_;
};

/// D(rho) = sigma(rho) f''(rho); throws std::out_of_range off the thermo grid.
double diffusion(const MobilityModel& mobility, const ThermoTable& thermo, double rho);
Eigen::MatrixXd diffusion_matrix(const Eigen::MatrixXd& sigma,
                                 const ThermoTable& thermo, double rho);

/// CSV rho,sigma_ij...,D_ij... for a list of (rho, sigma matrix).
void write_transport_csv(std::ostream& out, const std::vector<double>& rho,
                         const std::vector<Eigen::MatrixXd>& sigma,
                         const ThermoTable& thermo);

}  // namespace kawasaki
