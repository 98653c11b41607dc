#pragma once

// Rejection-free kinetic Monte Carlo for the exchange dynamics at diffusive
// speed N^2, with thinning for time-dependent perturbations.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "kawasaki/dynamics.hpp"
#include "kawasaki/rng.hpp"

namespace kawasaki {

/// Binary indexed tree over non-negative weights with prefix-sum search.
class FenwickTree {
 public:
  explicit FenwickTree(int n = 0);

  int size() const { return n_; }
  double total() const { return total_; }
  double leaf(int i) const { return leaf_[i]; }

  void set(int i, double value);
  /// Rebuild internal sums from the leaves (drops accumulated rounding).
  void rebuild();
  /// Smallest i with prefix(i+1) > u, restricted to positive leaves.
  int find(double u) const;

 private:
  int n_;
  int top_bit_ = 1;
  double total_ = 0.0;
  std::vector<double> tree_;
  std::vector<double> leaf_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> samples;
  std::uint64_t seed = 0;
  std::uint64_t events = 0;     // accepted exchanges
  std::uint64_t proposals = 0;  // candidate events drawn (== events unless thinning)
};

class KmcEngine {
 public:
  KmcEngine(const RateModel& model, Configuration initial, std::uint64_t seed);

  double time() const { return t_; }
  const Configuration& state() const { return eta_; }
  std::uint64_t events() const { return events_; }
  std::uint64_t proposals() const { return proposals_; }

  /// Run until the first event after `until` would occur; state() is then
  /// the configuration at time `until`.
  void advance(double until);

  /// Largest |leaf - freshly computed rate| over all bonds.
  double table_discrepancy() const;
  /// |tree total - sum of fresh rates| relative to that sum.
  double total_drift() const;

 private:
  double bond_rate(int b) const;
  void refresh_around(int x, int y);

  const RateModel& model_;
  Configuration eta_;
  Rng rng_;
  FenwickTree tree_;
  double speed_;
  double t_ = 0.0;
  double pending_ = -1.0;  // time of the next candidate event, if drawn
  std::uint64_t events_ = 0;
  std::uint64_t proposals_ = 0;
  std::uint64_t since_rebuild_ = 0;
  std::vector<int> touched_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

/// Single trajectory sampled at the observation times (each in [0, T]).
Trajectory kmc_run(const RateModel& model, const Configuration& initial,
                   double T, std::span<const double> observation_times,
                   std::uint64_t seed);

/// Product-Bernoulli configuration with eta_x ~ Bernoulli(profile((x+1/2)/N)).
Configuration sample_product_configuration(
    const Torus& torus, const std::function<double(std::span<const double>)>& profile,
    Rng& rng);

/// Ensemble of independent trajectories; trajectory k uses
/// stream_seed(master_seed, k) for both its initial state and its dynamics.
std::vector<Trajectory> run_ensemble(
    const RateModel& model,
    const std::function<Configuration(Rng&)>& initial, double T,
    std::span<const double> observation_times, int trajectories,
    std::uint64_t master_seed, int threads = 1);

/// CSV snapshot export: t,site,occupancy.
void write_trajectory_csv(std::ostream& out, const Torus& torus,
                          const Trajectory& traj);

/// Little-endian binary layout:
///   "KWSK1" | u32 d | u32 N | u32 m | m x (f64 t | ceil(N^d/64) x u64 words)
void write_trajectory_binary(std::ostream& out, const Torus& torus,
                             const Trajectory& traj);
struct BinaryTrajectory {
  int d = 0;
  int N = 0;
  std::vector<double> times;
  std::vector<Configuration> samples;
};
BinaryTrajectory read_trajectory_binary(std::istream& in);

}  // namespace kawasaki
