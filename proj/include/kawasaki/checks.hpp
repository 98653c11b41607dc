#pragma once

// Invariant suite run by the `check` subcommand at fixed small sizes.

#include <string>
#include <vector>

namespace kawasaki {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // threshold it was compared against
  std::string detail;
};

struct CheckOptions {
  /// Mutation hook: perturb the rate of one bond so detailed balance breaks.
  bool corrupt_rates = false;
  int threads = 1;
};

struct CheckReport {
  std::vector<CheckResult> results;
  double seconds = 0.0;

  bool passed() const;
  /// {"passed": .., "checks": [{name, passed, value, tolerance, detail}]}
  std::string to_json() const;
};

CheckReport run_checks(const CheckOptions& options = {});

}  // namespace kawasaki
