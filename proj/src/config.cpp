#include "kawasaki/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kawasaki/errors.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& why) {
  throw ConfigError(where + ": " + why);
}

double to_double(const std::string& where, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  fail(where, "expected a number, got '" + v + "'");
}

long long to_integer(const std::string& where, const std::string& v) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(where, "expected an integer, got '" + v + "'");
  }
  return x;
}

int to_int(const std::string& where, const std::string& v) {
  const long long x = to_integer(where, v);
  if (x < -(1LL << 30) || x > (1LL << 30)) fail(where, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& where, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(where, "expected an unsigned 64-bit integer, got '" + v + "'");
  }
  return x;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

template <class T>
std::string join_plain(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

void check_fourier(const std::string& where, const std::string& text) {
  try {
    (void)FourierSeries::parse(text);
  } catch (const std::exception& e) {
    fail(where, e.what());
  }
}

void check_one_of(const std::string& where, const std::string& v,
                  std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  fail(where, "'" + v + "' is not one of {" + list + "}");
}

using Setter = std::function<void(ExperimentConfig&, const std::string& where,
                                  const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"model",
       {
           {"d", [](auto& c, auto& w, auto& v) { c.model.d = to_int(w, v); }},
           {"N", [](auto& c, auto& w, auto& v) { c.model.N = to_int(w, v); }},
           {"interaction", [](auto& c, auto&, auto& v) { c.model.interaction = v; }},
           {"J", [](auto& c, auto& w, auto& v) { c.model.J = to_double(w, v); }},
           {"convention", [](auto& c, auto&, auto& v) { c.model.convention = v; }},
           {"rates", [](auto& c, auto&, auto& v) { c.model.rates = v; }},
           {"a", [](auto& c, auto& w, auto& v) { c.model.a = to_double(w, v); }},
           {"witness_radius",
            [](auto& c, auto& w, auto& v) { c.model.witness_radius = to_int(w, v); }},
       }},
      {"field",
       {
           {"E",
            [](auto& c, auto& w, auto& v) {
              c.field.E.clear();
              for (const auto& s : split_list(v)) c.field.E.push_back(to_double(w, s));
            }},
           {"U", [](auto& c, auto&, auto& v) { c.field.U = v; }},
           {"psi", [](auto& c, auto&, auto& v) { c.field.psi = v; }},
           {"H", [](auto& c, auto&, auto& v) { c.field.H = v; }},
       }},
      {"run",
       {
           {"T", [](auto& c, auto& w, auto& v) { c.run.T = to_double(w, v); }},
           {"trajectories",
            [](auto& c, auto& w, auto& v) { c.run.trajectories = to_int(w, v); }},
           {"seed", [](auto& c, auto& w, auto& v) { c.run.seed = to_u64(w, v); }},
           {"observe",
            [](auto& c, auto& w, auto& v) {
              c.run.observe.clear();
              for (const auto& s : split_list(v)) c.run.observe.push_back(to_double(w, s));
            }},
           {"initial", [](auto& c, auto&, auto& v) { c.run.initial = v; }},
           {"target", [](auto& c, auto&, auto& v) { c.run.target = v; }},
           {"K", [](auto& c, auto& w, auto& v) { c.run.K = to_int(w, v); }},
           {"n_ladder",
            [](auto& c, auto& w, auto& v) {
              c.run.n_ladder.clear();
              for (const auto& s : split_list(v)) c.run.n_ladder.push_back(to_int(w, s));
            }},
           {"rho",
            [](auto& c, auto& w, auto& v) {
              c.run.rho.clear();
              for (const auto& s : split_list(v)) c.run.rho.push_back(to_double(w, s));
            }},
       }},
      {"numerics",
       {
           {"M", [](auto& c, auto& w, auto& v) { c.numerics.M = to_int(w, v); }},
           {"pde_M", [](auto& c, auto& w, auto& v) { c.numerics.pde_M = to_int(w, v); }},
           {"c_safe", [](auto& c, auto& w, auto& v) { c.numerics.c_safe = to_double(w, v); }},
           {"k", [](auto& c, auto& w, auto& v) { c.numerics.k = to_int(w, v); }},
           {"output_every",
            [](auto& c, auto& w, auto& v) { c.numerics.output_every = to_int(w, v); }},
           {"modes", [](auto& c, auto& w, auto& v) { c.numerics.modes = to_int(w, v); }},
           {"tolerance",
            [](auto& c, auto& w, auto& v) { c.numerics.tolerance = to_double(w, v); }},
           {"thermo_points",
            [](auto& c, auto& w, auto& v) { c.numerics.thermo_points = to_int(w, v); }},
           {"rho_min", [](auto& c, auto& w, auto& v) { c.numerics.rho_min = to_double(w, v); }},
       }},
      {"output",
       {
           {"dir", [](auto& c, auto&, auto& v) { c.output.dir = v; }},
           {"formats", [](auto& c, auto&, auto& v) { c.output.formats = split_list(v); }},
       }},
  };
  return table;
}

void validate_static(const ExperimentConfig& c) {
  const auto& m = c.model;
  if (m.d < 1 || m.d > 2) fail("model.d", "must be 1 or 2");
  if (m.N < 2) fail("model.N", "must be >= 2");
  check_one_of("model.interaction", m.interaction, {"none", "nn"});
  check_one_of("model.convention", m.convention, {"hamiltonian", "fugacity"});
  check_one_of("model.rates", m.rates, {"heat_bath", "neighbor_weighted"});
  if (m.interaction == "none" && m.J != 0.0) fail("model.J", "nonzero with interaction = none");
  if (m.interaction == "nn" && m.d != 1) {
    fail("model.interaction", "interacting thermodynamics is available for d = 1 only");
  }
  if (m.a < 0.0) fail("model.a", "must be >= 0");
  if (m.witness_radius < 1) fail("model.witness_radius", "must be >= 1");

  if (!c.field.E.empty() && static_cast<int>(c.field.E.size()) != m.d) {
    fail("field.E", "needs " + std::to_string(m.d) + " components");
  }
  check_fourier("field.U", c.field.U);
  check_fourier("field.psi", c.field.psi);
  check_fourier("field.H", c.field.H);
  if (m.d == 1 && !FourierSeries::parse(c.field.psi).is_flat()) {
    fail("field.psi", "a stream function needs d = 2");
  }

  const auto& r = c.run;
  if (!(r.T > 0.0)) fail("run.T", "must be > 0");
  if (r.trajectories < 0) fail("run.trajectories", "must be >= 0");
  for (double t : r.observe) {
    if (!(t >= 0.0 && t <= r.T)) fail("run.observe", "times must lie in [0, T]");
  }
  if (!std::is_sorted(r.observe.begin(), r.observe.end()) ||
      std::adjacent_find(r.observe.begin(), r.observe.end()) != r.observe.end()) {
    fail("run.observe", "times must be strictly increasing");
  }
  check_fourier("run.initial", r.initial);
  check_fourier("run.target", r.target);
  if (r.K < 0) fail("run.K", "must be >= 0");
  for (int n : r.n_ladder) {
    if (n < 2) fail("run.n_ladder", "entries must be >= 2");
  }
  for (double v : r.rho) {
    if (!(v >= 0.0 && v <= 1.0)) fail("run.rho", "densities must lie in [0, 1]");
  }

  const auto& n = c.numerics;
  if (n.M < 1) fail("numerics.M", "must be >= 1");
  if (n.pde_M < 3) fail("numerics.pde_M", "must be >= 3");
  if (!(n.c_safe > 0.0 && n.c_safe <= 0.5)) fail("numerics.c_safe", "must lie in (0, 0.5]");
  if (n.k < 0) fail("numerics.k", "must be >= 0");
  if (n.output_every < 1) fail("numerics.output_every", "must be >= 1");
  if (n.modes < 1) fail("numerics.modes", "must be >= 1");
  if (!(n.tolerance > 0.0)) fail("numerics.tolerance", "must be > 0");
  if (n.thermo_points < 16) fail("numerics.thermo_points", "must be >= 16");
  if (!(n.rho_min > 0.0 && n.rho_min < 0.01)) fail("numerics.rho_min", "must lie in (0, 0.01)");

  if (c.output.dir.empty()) fail("output.dir", "must not be empty");
  for (const auto& f : c.output.formats) check_one_of("output.formats", f, {"csv", "json", "bin"});
}

}  // namespace

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "[model]\n"
     << "d = " << model.d << "\nN = " << model.N << "\ninteraction = " << model.interaction
     << "\nJ = " << fmt_double(model.J) << "\nconvention = " << model.convention
     << "\nrates = " << model.rates << "\na = " << fmt_double(model.a)
     << "\nwitness_radius = " << model.witness_radius << "\n\n";
  os << "[field]\n"
     << "E = " << join_doubles(field.E) << "\nU = " << field.U << "\npsi = " << field.psi
     << "\nH = " << field.H << "\n\n";
  os << "[run]\n"
     << "T = " << fmt_double(run.T) << "\ntrajectories = " << run.trajectories << '\n';
  if (run.seed) os << "seed = " << *run.seed << '\n';
  os << "observe = " << join_doubles(run.observe) << "\ninitial = " << run.initial
     << "\ntarget = " << run.target << "\nK = " << run.K
     << "\nn_ladder = " << join_plain(run.n_ladder) << "\nrho = " << join_doubles(run.rho)
     << "\n\n";
  os << "[numerics]\n"
     << "M = " << numerics.M << "\npde_M = " << numerics.pde_M
     << "\nc_safe = " << fmt_double(numerics.c_safe) << "\nk = " << numerics.k
     << "\noutput_every = " << numerics.output_every << "\nmodes = " << numerics.modes
     << "\ntolerance = " << fmt_double(numerics.tolerance)
     << "\nthermo_points = " << numerics.thermo_points
     << "\nrho_min = " << fmt_double(numerics.rho_min) << "\n\n";
  os << "[output]\n"
     << "dir = " << output.dir << "\nformats = " << join_plain(output.formats) << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(serialize())); }

bool ExperimentConfig::wants(const std::string& format) const {
  return std::find(output.formats.begin(), output.formats.end(), format) !=
         output.formats.end();
}

Interaction ExperimentConfig::interaction() const {
  Interaction i = model.interaction == "nn" ? Interaction::nearest_neighbor(model.J)
                                            : Interaction::zero();
  i.convention = model.convention == "fugacity" ? ChemicalPotentialSign::kFugacity
                                                : ChemicalPotentialSign::kHamiltonian;
  return i;
}

RateFamily ExperimentConfig::rate_family() const {
  if (model.rates == "neighbor_weighted") {
    return RateFamily::neighbor_weighted(model.a, model.witness_radius);
  }
  return RateFamily::heat_bath();
}

FieldSpec ExperimentConfig::field_spec() const {
  FieldSpec f(model.d);
  if (!field.E.empty()) f.set_constant(field.E);
  f.set_potential(FourierSeries::parse(field.U));
  if (model.d == 2) f.set_stream_function(FourierSeries::parse(field.psi));
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    fail("field", e.what());
  }
  return f;
}

FourierSeries ExperimentConfig::initial_profile() const { return FourierSeries::parse(run.initial); }
FourierSeries ExperimentConfig::target_profile() const { return FourierSeries::parse(run.target); }
FourierSeries ExperimentConfig::control_potential() const { return FourierSeries::parse(field.H); }

std::vector<double> ExperimentConfig::observation_times() const {
  return run.observe.empty() ? std::vector<double>{run.T} : run.observe;
}

ThermoTable::Options ExperimentConfig::thermo_options() const {
  return {numerics.thermo_points, numerics.rho_min};
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') fail(at, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!setters().contains(section)) fail(at, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(at, "expected key = value");
    if (section.empty()) fail(at, "key outside of a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string where = section + "." + key;
    const auto& keys = setters().at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) fail(where, "unknown key");
    if (seen[where]++) fail(where, "given twice");
    it->second(c, where, value);
  }
  validate_static(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_for(const ExperimentConfig& c, const std::string& subcommand) {
  validate_static(c);
  (void)c.field_spec();
  const bool ensemble = subcommand == "simulate" || subcommand == "hydro-compare";
  if (ensemble) {
    if (c.run.trajectories < 1) fail("run.trajectories", "must be >= 1 for " + subcommand);
    if (!c.run.seed) fail("run.seed", "required when trajectories > 0");
    std::vector<int> ladder = c.run.n_ladder.empty() ? std::vector<int>{c.model.N}
                                                     : c.run.n_ladder;
    if (subcommand == "simulate") ladder = {c.model.N};
    for (int n : ladder) {
      if (n % c.numerics.M != 0) {
        fail("numerics.M", std::to_string(c.numerics.M) + " does not divide N = " +
                               std::to_string(n));
      }
    }
  }
  if (subcommand == "hydro-compare" && c.numerics.pde_M % c.numerics.M != 0) {
    fail("numerics.pde_M", "comparison grid M must divide pde_M");
  }
  if (subcommand == "exact-stationary") {
    const int sites = c.model.d == 1 ? c.model.N : c.model.N * c.model.N;
    if (sites > 20) fail("model.N", "sector enumeration is limited to 20 sites");
    if (c.run.K > sites) fail("run.K", "more particles than sites");
  }
  if (subcommand == "mobility" && c.numerics.k > 1 && c.model.d == 2) {
    fail("numerics.k", "support radius > 1 exceeds the enumeration window in d = 2");
  }
  if (subcommand == "ratefn" || subcommand == "quasipotential" ||
      subcommand == "duality-check") {
    if (c.model.d == 2 && c.numerics.pde_M > 128) {
      fail("numerics.pde_M", "d = 2 grids are limited to 128 cells per side");
    }
  }
}

}  // namespace kawasaki
