#pragma once

// Experiment configuration: flat sectioned key=value text.
//
//   # comment
//   [model]
//   d = 1
//   N = 64
//   ...
//
// Unknown sections or keys are rejected. Every value has a default, so an
// empty file is a valid (tiny) experiment.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kawasaki/dynamics.hpp"
#include "kawasaki/field.hpp"
#include "kawasaki/gibbs.hpp"

namespace kawasaki {

struct ModelSection {
  int d = 1;
  int N = 64;
  std::string interaction = "none";  // none | nn
  double J = 0.0;
  std::string convention = "hamiltonian";  // hamiltonian | fugacity
  std::string rates = "heat_bath";         // heat_bath | neighbor_weighted
  double a = 0.0;
  int witness_radius = 1;

  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct FieldSection {
  std::vector<double> E;  // constant part; empty means zero
  std::string U = "0";    // Fourier series of the potential
  std::string psi = "0";  // stream function (d = 2)
  std::string H = "0";    // control potential; ratefn drives with 2 grad H

  friend bool operator==(const FieldSection&, const FieldSection&) = default;
};

struct RunSection {
  double T = 0.1;
  int trajectories = 1;
  std::optional<std::uint64_t> seed;
  std::vector<double> observe;       // observation times; empty means {T}
  std::string initial = "0.5";       // Fourier profile of the initial density
  std::string target = "0.5";        // Fourier profile (quasipotential / ratefn)
  int K = 0;                         // particles for exact-stationary (0: N^d/2)
  std::vector<int> n_ladder;         // hydro-compare N values (empty: {N})
  std::vector<double> rho = {0.5};   // densities for mobility / thermo

  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct NumericsSection {
  int M = 32;        // comparison grid
  int pde_M = 256;   // solver grid
  double c_safe = 0.4;
  int k = 1;         // mobility support radius
  int output_every = 1;
  int modes = 4;     // Fourier test modes for the dual bound
  double tolerance = 1e-4;  // exit-path relaxation tolerance
  int thermo_points = 2048;
  double rho_min = 1e-4;

  friend bool operator==(const NumericsSection&, const NumericsSection&) = default;
};

struct OutputSection {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv", "json"};  // csv | json | bin

  friend bool operator==(const OutputSection&, const OutputSection&) = default;
};

struct ExperimentConfig {
  ModelSection model;
  FieldSection field;
  RunSection run;
  NumericsSection numerics;
  OutputSection output;

  /// Canonical text; parse(serialize(c)) == c.
  std::string serialize() const;
  /// FNV-1a of the canonical text, 16 hex digits.
  std::string hash() const;

  bool wants(const std::string& format) const;

  Interaction interaction() const;
  RateFamily rate_family() const;
  FieldSpec field_spec() const;
  FourierSeries initial_profile() const;
  FourierSeries target_profile() const;
  FourierSeries control_potential() const;
  std::vector<double> observation_times() const;
  ThermoTable::Options thermo_options() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError with "section.key: reason" messages.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Checks that depend on the subcommand (e.g. seeds for ensembles,
/// M | N for micro/macro comparisons). Throws ConfigError.
void validate_for(const ExperimentConfig& config, const std::string& subcommand);

}  // namespace kawasaki
