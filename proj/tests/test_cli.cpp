#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kawasaki/config.hpp"
#include "kawasaki/errors.hpp"

using namespace kawasaki;
namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("KAWASAKI_CLI");
  return p != nullptr ? p : "kawasaki";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kawasaki_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSimulate = R"([model]
d = 1
N = 32
rates = neighbor_weighted
a = 0.5
[field]
E = 1
[run]
T = 0.01
trajectories = 3
seed = 17
observe = 0.005, 0.01
initial = 0.5; 0.2*sin[1]
[numerics]
M = 8
[output]
formats = csv, json, bin
)";

}  // namespace

TEST_CASE("version and usage errors") {
  CHECK(run("--version") == 0);
  CHECK(run("") == 2);
  CHECK(run("simulate") == 2);  // --config is required
  CHECK(run("no-such-command") == 2);
}

TEST_CASE("simulate writes headed outputs and reruns byte-identically") {
  const fs::path dir = scratch("sim");
  const fs::path cfg = write_config(dir, "sim.ini", kSimulate);
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + (dir / "b").string() +
              " --threads 3") == 0);
  for (const char* f : {"density.csv", "summary.json", "trajectory_0.bin",
                        "trajectory_0.bin.meta.json", "config.ini"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(fs::exists(dir / "a" / "timing.json"));
  const std::string csv = slurp(dir / "a" / "density.csv");
  CHECK(csv.rfind("# kawasaki ", 0) == 0);
  CHECK(csv.find("# config ") != std::string::npos);
  CHECK(slurp(dir / "a" / "summary.json").find("\"config_hash\"") != std::string::npos);

  // a different seed changes the data
  REQUIRE(run("simulate --config " + cfg.string() + " --seed 18 --out " + (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "density.csv") != slurp(dir / "c" / "density.csv"));
}

TEST_CASE("written config round-trips") {
  const fs::path dir = scratch("roundtrip");
  const fs::path cfg = write_config(dir, "sim.ini", kSimulate);
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  const ExperimentConfig original = load_config(cfg.string());
  const ExperimentConfig echoed = load_config((dir / "a" / "config.ini").string());
  CHECK(echoed.model == original.model);
  CHECK(echoed.field == original.field);
  CHECK(echoed.run == original.run);
  CHECK(echoed.numerics == original.numerics);
  CHECK(parse_config(original.serialize()).serialize() == original.serialize());
  CHECK(parse_config(original.serialize()).hash() == original.hash());
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path dir = scratch("errors");
  const std::string bad[] = {
      "[run]\ntrajectories = 0\nseed = 1\n",             // empty ensemble
      "[run]\ntrajectories = 2\n",                       // missing seed
      "[model]\nN = 30\n[run]\nseed = 1\n",              // M does not divide N
      "[model]\nbogus = 1\n",                            // unknown key
      "[model]\nd = 4\n",                                // bad dimension
      "[run]\nobserve = 0.2, 0.1\nseed = 1\n",           // unsorted times
      "d = 1\n",                                         // key outside a section
      "[model]\nd = 1\nd = 2\n",                         // duplicate
  };
  int i = 0;
  for (const std::string& text : bad) {
    CAPTURE(text);
    const fs::path p = write_config(dir, "bad" + std::to_string(i++) + ".ini", text);
    CHECK(run("simulate --config " + p.string() + " --out " + (dir / "o").string()) == 2);
  }
  CHECK(run("simulate --config " + (dir / "missing.ini").string()) == 2);
  const fs::path big = write_config(dir, "big.ini", "[model]\nN = 24\n");
  CHECK(run("exact-stationary --config " + big.string() + " --out " + (dir / "o").string()) == 2);
}

TEST_CASE("invariant suite and its mutation hook") {
  const fs::path dir = scratch("check");
  CHECK(run("check --out " + (dir / "ok").string()) == 0);
  CHECK(slurp(dir / "ok" / "check.json").find("\"passed\": true") != std::string::npos);
  CHECK(run("check --mutate-rates --out " + (dir / "bad").string()) == 3);
  CHECK(slurp(dir / "bad" / "check.json").find("\"passed\": false") != std::string::npos);
}

TEST_CASE("small analysis subcommands run") {
  const fs::path dir = scratch("small");
  const fs::path st = write_config(dir, "st.ini",
                                   "[model]\nN = 8\nrates = neighbor_weighted\na = 0.5\n"
                                   "interaction = nn\nJ = 0.5\n[field]\nE = 1\n[run]\nK = 4\n");
  CHECK(run("exact-stationary --config " + st.string() + " --out " + (dir / "st").string()) == 0);
  const std::string js = slurp(dir / "st" / "stationary.json");
  CHECK(js.find("non-gradient") != std::string::npos);

  const fs::path th = write_config(dir, "th.ini",
                                   "[model]\ninteraction = nn\nJ = 0.5\n[numerics]\nthermo_points = 257\n");
  CHECK(run("thermo --config " + th.string() + " --out " + (dir / "th").string()) == 0);
  CHECK(fs::exists(dir / "th" / "thermo.csv"));

  const fs::path mob = write_config(dir, "mob.ini",
                                    "[model]\nrates = neighbor_weighted\na = 0.5\n"
                                    "[run]\nrho = 0.3, 0.5\n[numerics]\nk = 2\n");
  CHECK(run("mobility --config " + mob.string() + " --out " + (dir / "mob").string()) == 0);
  CHECK(fs::exists(dir / "mob" / "mobility.csv"));

  const fs::path rf = write_config(dir, "rf.ini",
                                   "[field]\nE = 1\nH = 0.2*sin[1]\n[run]\nT = 0.02\n"
                                   "initial = 0.5; 0.1*sin[1]\n[numerics]\npde_M = 64\n");
  CHECK(run("ratefn --config " + rf.string() + " --out " + (dir / "rf").string()) == 0);
  CHECK(fs::exists(dir / "rf" / "ratefn.json"));
}

TEST_CASE("in-process parser diagnostics name the key") {
  try {
    parse_config("[numerics]\nc_safe = 0.9\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("numerics.c_safe") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[nope]\n"), ConfigError);
  const ExperimentConfig c = parse_config("# comment\n[model]\nN = 16 # trailing\n");
  CHECK(c.model.N == 16);
  CHECK_THROWS_AS(validate_for(parse_config("[model]\nd = 2\nN = 8\n[numerics]\nk = 2\n"), "mobility"),
                  ConfigError);
}
