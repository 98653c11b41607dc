// kawasaki: configuration-driven experiment runner.
//
// Exit codes: 0 success, 2 configuration error, 3 invariant failure,
// 4 numerical guard tripped.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "kawasaki/checks.hpp"
#include "kawasaki/config.hpp"
#include "kawasaki/errors.hpp"
#include "kawasaki/experiments.hpp"
#include "kawasaki/io.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kInvariantFailure = 3;
constexpr int kNumericalGuard = 4;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config_path, "Experiment config file");
  if (needs_config) opt->required();
  sub->add_option("--out", c.out_dir, "Output directory (overrides [output] dir)");
  sub->add_option("--seed", c.seed, "Master seed (overrides [run] seed)");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

kawasaki::RunContext context(const Common& c, const CLI::App* sub) {
  kawasaki::RunContext ctx;
  ctx.config = kawasaki::load_config(c.config_path);
  if (sub->count("--seed") > 0) ctx.config.run.seed = c.seed;
  ctx.out_dir = c.out_dir;
  ctx.threads = c.threads;
  return ctx;
}

int run_check(const Common& c, bool mutate) {
  kawasaki::CheckOptions opt;
  opt.corrupt_rates = mutate;
  opt.threads = c.threads;
  const kawasaki::CheckReport rep = kawasaki::run_checks(opt);
  for (const auto& r : rep.results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << r.value
              << " tol=" << r.tolerance << "  " << r.detail << '\n';
  }
  const std::string verdict = rep.to_json();
  if (!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    std::ofstream out(std::filesystem::path(c.out_dir) / "check.json");
    out << verdict << '\n';
  } else {
    std::cout << verdict << '\n';
  }
  std::cerr << "check: " << rep.results.size() << " checks in " << rep.seconds << " s\n";
  return rep.passed() ? 0 : kInvariantFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven lattice gases: simulation, hydrodynamics and large deviations"};
  app.set_version_flag("--version", std::string(kawasaki::version_string()));
  app.require_subcommand(1);

  using Driver = std::function<int(const kawasaki::RunContext&)>;
  const std::vector<std::tuple<std::string, std::string, Driver>> commands = {
      {"simulate", "Run a trajectory ensemble", kawasaki::run_simulate},
      {"hydro-compare", "Ensemble mean vs hydrodynamic solution", kawasaki::run_hydro_compare},
      {"exact-stationary", "Exact stationary measure of a small sector",
       kawasaki::run_exact_stationary},
      {"mobility", "Variational mobility", kawasaki::run_mobility},
      {"thermo", "Free-energy table", kawasaki::run_thermo},
      {"ratefn", "Dynamical rate functional of a driven path", kawasaki::run_ratefn},
      {"quasipotential", "Optimal exit path and quasi-potential", kawasaki::run_quasipotential},
      {"duality-check", "Time-reversal duality and Lyapunov identities",
       kawasaki::run_duality_check},
  };
  std::map<std::string, Common> opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help, driver] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_common(subs[name], opts[name], true);
  }
  Common check_opts;
  bool mutate = false;
  CLI::App* check = app.add_subcommand("check", "Invariant suite");
  add_common(check, check_opts, false);
  check->add_flag("--mutate-rates", mutate, "Corrupt one bond rate (mutation test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (check->parsed()) return run_check(check_opts, mutate);
    for (const auto& [name, help, driver] : commands) {
      if (subs[name]->parsed()) return driver(context(opts[name], subs[name]));
    }
  } catch (const kawasaki::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kawasaki::NumericalGuardError& e) {
    std::cerr << "numerical guard: " << e.what() << '\n';
    return kNumericalGuard;
  } catch (const kawasaki::SizeGuardError& e) {
    std::cerr << "size guard: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
