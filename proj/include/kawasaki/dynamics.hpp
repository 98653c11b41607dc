#pragma once

// Jump-rate families of the Kawasaki exchange dynamics (symmetric, weakly
// asymmetric, time-inhomogeneously perturbed), and exact generator analysis
// on enumerable particle-number sectors.

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kawasaki/field.hpp"
#include "kawasaki/gibbs.hpp"
#include "kawasaki/lattice.hpp"

namespace kawasaki {

/// Symmetric rate rule c^0 satisfying detailed balance w.r.t. H_N.
///
///   heat bath:         c^0 = exp{-grad_{x,y} H / 2}
///   neighbour weighted: c^0 = (1 + a * sum_{z in A} eta_z) exp{-grad_{x,y} H / 2}
///
/// A is the set of sites within l1 distance witness_radius of either bond
/// endpoint, endpoints excluded, so the prefactor is invariant under the
/// exchange. With zero interaction the heat-bath rule is the simple
/// exclusion process. The neighbour-weighted prefactor is affine in the
/// occupations, so without interaction its current is still a sum of lattice
/// differences and the uniform measure stays invariant under any constant
/// field; it is genuinely non-gradient only once the interaction is on.
struct RateFamily {
  enum class Kind { kHeatBath, kNeighborWeighted };

  Kind kind = Kind::kHeatBath;
  double a = 0.0;
  int witness_radius = 1;

  static RateFamily heat_bath() { return {}; }
  static RateFamily neighbor_weighted(double a, int radius = 1) {
    return {Kind::kNeighborWeighted, a, radius};
  }
};

/// Witness set A of a bond for the neighbour-weighted family.
std::vector<int> witness_sites(const Torus& torus, const Bond& bond, int radius);

/// Position (x + 1/2)/N of a lattice site: the centre of its grid cell.
Vec3 site_position(const Torus& torus, int site);

/// E_N(x,y) along the bond; reversed=true gives the orientation (y,x) and
/// equals minus the forward value.
double field_work(const FieldSpec& field, const Torus& torus, const Bond& bond,
                  bool reversed = false);
/// Ordered-pair form; y must be a nearest neighbour of x (N >= 3).
double field_work(const FieldSpec& field, const Torus& torus, int x, int y);

double rate_symmetric(const RateFamily& family, const Interaction& interaction,
                      const Torus& torus, const Configuration& config,
                      const Bond& bond);

/// c^E = c^0 exp{E_N(x,y)(eta_x - eta_y)/2}.
double rate_asymmetric(const RateFamily& family, const Interaction& interaction,
                       const FieldSpec& field, const Torus& torus,
                       const Configuration& config, const Bond& bond);

/// H(t, r) for the perturbed dynamics.
using TimePotential = std::function<double(double t, std::span<const double> r)>;

/// c^{E,H} = c^E exp{F(t, eta^{x,y}) - F(t, eta)}, F = (1/2) sum_x H(t,x/N) eta_x.
double rate_perturbed(const RateFamily& family, const Interaction& interaction,
                      const FieldSpec& field, const TimePotential& potential,
                      const Torus& torus, const Configuration& config,
                      const Bond& bond, double t);

/// Time-dependent potential evaluated at lattice sites, with a uniform bound
/// on |H(t, y) - H(t, x)| over bonds and times for thinning.
class SitePotential {
 public:
  virtual ~SitePotential() = default;
  virtual double value(double t, int site) const = 0;
  virtual double max_bond_jump() const = 0;
};

/// Site values sampled at increasing times, linear in t between samples and
/// held constant outside [t_0, t_m].
class SampledSitePotential final : public SitePotential {
 public:
  SampledSitePotential(const Torus& torus, std::vector<double> times,
                       std::vector<Eigen::VectorXd> site_values);
  double value(double t, int site) const override;
  double max_bond_jump() const override { return max_jump_; }

 private:
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> values_;
  double max_jump_ = 0.0;
};

/// Analytic H(t, r) with a user-supplied spatial Lipschitz constant L
/// (|grad H| <= L in the l1 sense), giving max_bond_jump = L/N.
class FunctionSitePotential final : public SitePotential {
 public:
  FunctionSitePotential(const Torus& torus, TimePotential potential,
                        double lipschitz);
  double value(double t, int site) const override;
  double max_bond_jump() const override { return bound_; }

 private:
  std::vector<Vec3> positions_;
  int d_;
  TimePotential potential_;
  double bound_;
};

/// Precomputed rate evaluator used by the KMC engine and the generator
/// builder: bond geometry, field work per bond and dependency lists.
class RateModel {
 public:
  RateModel(Torus torus, Interaction interaction, RateFamily family,
            FieldSpec field);

  const Torus& torus() const { return torus_; }
  const Interaction& interaction() const { return interaction_; }
  const RateFamily& family() const { return family_; }
  const FieldSpec& field() const { return field_; }

  void set_perturbation(std::shared_ptr<const SitePotential> potential);
  const SitePotential* perturbation() const { return potential_.get(); }
  /// exp{max_bond_jump / 2}; 1 without perturbation.
  double thinning_factor() const { return thinning_; }

  double symmetric(const Configuration& eta, int bond) const;
  /// Time-independent weakly asymmetric rate c^E.
  double rate(const Configuration& eta, int bond) const;
  /// c^{E,H} at time t (equals rate() without perturbation).
  double rate_at(const Configuration& eta, int bond, double t) const;

  double work(int bond) const { return work_[bond]; }

  /// Bonds whose rate may change when the occupancy of `site` changes.
  std::span<const int> dependents(int site) const;

  /// Replace the rate evaluator (mutation testing of invariant checks).
  void set_rate_override(std::function<double(const Configuration&, int)> f) {
    override_ = std::move(f);
  }

 private:
  Torus torus_;
  Interaction interaction_;
  RateFamily family_;
  FieldSpec field_;
  std::vector<int> head_, tail_;
  std::vector<double> work_;
  std::vector<int> witness_offsets_, witnesses_;
  std::vector<int> dep_offsets_, deps_;
  std::shared_ptr<const SitePotential> potential_;
  double thinning_ = 1.0;
  std::function<double(const Configuration&, int)> override_;
};

using BondRate = std::function<double(const Configuration&, int bond)>;

/// Generator L_{E,N} restricted to Omega_{N,K}: off-diagonal N^2 c(eta, b)
/// for eta -> eta^b, rows summing to zero.
struct SectorGenerator {
  std::vector<Configuration> states;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
};

constexpr int kMaxGeneratorStates = 200000;

SectorGenerator generator_matrix(const Torus& torus, int K, const BondRate& rate);
SectorGenerator generator_matrix(const RateModel& model, int K);

struct StationaryResult {
  Eigen::VectorXd distribution;
  double residual = 0.0;  // max |(pi L)_j|
};

/// Unique invariant probability vector of an irreducible sector generator.
StationaryResult stationary_exact(const SectorGenerator& generator);

/// max_{i,j} |pi_i L_ij - pi_j L_ji|.
double detailed_balance_residual(const SectorGenerator& generator,
                                 const Eigen::VectorXd& pi);

}  // namespace kawasaki
