#pragma once

// Subcommand drivers. Each driver validates the config for its subcommand,
// computes, and writes its data files into the output directory with a
// version / config-hash header. Wall-clock figures go to timing.json only,
// so every other file is byte-identical across reruns.

#include <string>
#include <vector>

#include "kawasaki/config.hpp"
#include "kawasaki/ldp.hpp"
#include "kawasaki/pde.hpp"

namespace kawasaki {

struct RunContext {
  ExperimentConfig config;
  std::string out_dir;  // overrides config.output.dir when non-empty
  int threads = 1;

  std::string directory() const { return out_dir.empty() ? config.output.dir : out_dir; }
};

/// Transport coefficients implied by the model section: the exclusion
/// closed form for the free heat-bath gas, variational sigma_k otherwise.
Coefficients model_coefficients(const ExperimentConfig& config, const ThermoTable& thermo);

/// Initial profile evaluated on a grid; throws ConfigError outside [0,1].
DensityField profile_on_grid(const FourierSeries& profile, const Grid& grid,
                             const std::string& what);

struct HydroCompareRow {
  int N = 0;
  double t = 0.0;
  double l1 = 0.0;          // ensemble mean vs PDE, on the M grid
  double micro_mass = 0.0;  // ensemble mean mass at t
  double micro_mass_t0 = 0.0;
  double macro_mass = 0.0;
  double macro_mass_drift = 0.0;
  double max_particle_drift = 0.0;  // largest |count(t) - count(0)| over members
  double clt_scale = 0.0;           // sqrt(M^d / (trajectories N^d))
  double mean_standard_error = 0.0;
};

/// Ensemble-vs-PDE comparison across the N ladder.
std::vector<HydroCompareRow> hydro_compare(const ExperimentConfig& config, int threads);

struct StationaryReport {
  int states = 0;
  double max_deviation = 0.0;   // |pi - reference|_inf
  double detailed_balance = 0.0;  // of the generator w.r.t. the reference
  double solve_residual = 0.0;
  bool conservative = false;    // reference includes exp{-sum U_x eta_x}
  std::string verdict;          // "gradient" | "non-gradient"
  Eigen::VectorXd pi;
  Eigen::VectorXd reference;
};

StationaryReport exact_stationary(const ExperimentConfig& config);

/// Subcommand entry points; return the process exit code (0 or 3).
int run_simulate(const RunContext& ctx);
int run_hydro_compare(const RunContext& ctx);
int run_exact_stationary(const RunContext& ctx);
int run_mobility(const RunContext& ctx);
int run_thermo(const RunContext& ctx);
int run_ratefn(const RunContext& ctx);
int run_quasipotential(const RunContext& ctx);
int run_duality_check(const RunContext& ctx);

}  // namespace kawasaki
