#include "kawasaki/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kawasaki/errors.hpp"
#include "kawasaki/interp.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

double hamiltonian(const Interaction& interaction, const Torus& torus,
                   const Configuration& config) {
  if (interaction.is_zero()) return 0.0;
  int pairs = 0;
  for (const Bond& b : torus.bonds()) {
    pairs += config.occ(torus.head(b)) * config.occ(torus.tail(b));
  }
  return interaction.coupling * pairs;
}

double energy_diff(const Interaction& interaction, const Torus& torus,
                   const Configuration& config, const Bond& bond) {
  if (interaction.is_zero()) return 0.0;
  const int x = torus.head(bond);
  const int y = torus.tail(bond);
  const int diff = config.occ(y) - config.occ(x);
  if (diff == 0) return 0.0;
  int around_x = 0;
  for (int z : torus.neighbors(x)) {
    if (z != y) around_x += config.occ(z);
  }
  int around_y = 0;
  for (int z : torus.neighbors(y)) {
    if (z != x) around_y += config.occ(z);
  }
  return interaction.coupling * diff * (around_x - around_y);
}

PressurePoint fugacity_pressure(const Interaction& interaction, double lambda) {
  // T = [[1, e^{lambda/2}], [e^{lambda/2}, e^{lambda-J}]]; Perron root
  // l = (1 + a + s)/2 with a = e^{lambda-J}, s^2 = (1-a)^2 + 4 e^lambda.
  const double J = interaction.coupling;
  const double a = std::exp(lambda - J);
  const double b = std::exp(lambda);
  const double q = (1.0 - a) * (1.0 - a) + 4.0 * b;
  const double dq = -2.0 * (1.0 - a) * a + 4.0 * b;
  const double d2q = 4.0 * a * a - 2.0 * a + 4.0 * b;
  const double s = std::sqrt(q);
  const double ds = dq / (2.0 * s);
  const double d2s = d2q / (2.0 * s) - dq * dq / (4.0 * s * s * s);
  const double l = 0.5 * (1.0 + a + s);
  const double dl = 0.5 * (a + ds);
  const double d2l = 0.5 * (a + d2s);
  PressurePoint out;
  out.p = std::log(l);
  out.dp = dl / l;
  out.d2p = d2l / l - out.dp * out.dp;
  return out;
}

double pressure(const Interaction& interaction, double lambda) {
  const double sign =
      interaction.convention == ChemicalPotentialSign::kHamiltonian ? -1.0 : 1.0;
  return fugacity_pressure(interaction, sign * lambda).p;
}

double pressure_enumerated(const Interaction& interaction, const Torus& torus,
                           double lambda) {
  const int n = torus.num_sites();
  if (n > kMaxWindowSites) {
    throw SizeGuardError("pressure enumeration limited to " +
                         std::to_string(kMaxWindowSites) + " sites");
  }
  const double sign =
      interaction.convention == ChemicalPotentialSign::kHamiltonian ? -1.0 : 1.0;
  const std::uint64_t total = std::uint64_t{1} << n;
  std::vector<double> logw(total);
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint64_t m = 0; m < total; ++m) {
    const Configuration eta = Configuration::from_mask(n, m);
    logw[m] = -hamiltonian(interaction, torus, eta) + sign * lambda * eta.count();
    top = std::max(top, logw[m]);
  }
  double acc = 0.0;
  for (double v : logw) acc += std::exp(v - top);
  return (top + std::log(acc)) / n;
}

ThermoTable::ThermoTable(const Interaction& interaction, Options options)
    : interaction_(interaction), rho_min_(options.rho_min) {
  if (options.points < 8) throw std::invalid_argument("thermo grid too small");
  if (!(options.rho_min > 0.0 && options.rho_min < 0.25)) {
    throw std::invalid_argument("rho_min must lie in (0, 0.25)");
  }
  const int n = options.points;
  h_ = (1.0 - 2.0 * rho_min_) / (n - 1);
  rho_.resize(n);
  lambda_.resize(n);
  f_.resize(n);
  fp_.resize(n);
  fpp_.resize(n);
  chi_.resize(n);
  for (int k = 0; k < n; ++k) {
    const double rho = rho_min_ + k * h_;
    const double lambda = chemical_potential(rho);
    const PressurePoint pp = fugacity_pressure(interaction_, lambda);
    rho_[k] = rho;
    lambda_[k] = lambda;
    f_[k] = lambda * rho - pp.p;
    fp_[k] = lambda;
    chi_[k] = pp.d2p;
    fpp_[k] = 1.0 / pp.d2p;
  }
  fpp_slope_ = pchip_slopes(fpp_, h_);
  chi_slope_ = pchip_slopes(chi_, h_);
}

double ThermoTable::chemical_potential(double rho) const {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::out_of_range("chemical potential requires rho in (0,1)");
  }
  auto g = [&](double lambda) {
    return fugacity_pressure(interaction_, lambda).dp - rho;
  };
  double lambda = std::log(rho / (1.0 - rho)) + 2.0 * interaction_.coupling * rho;
  double lo = lambda - 1.0;
  double hi = lambda + 1.0;
  while (g(lo) > 0.0) lo -= 2.0 * (hi - lo);
  while (g(hi) < 0.0) hi += 2.0 * (hi - lo);
  lambda = std::clamp(lambda, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const PressurePoint pp = fugacity_pressure(interaction_, lambda);
    const double val = pp.dp - rho;
    if (val > 0.0) hi = lambda; else lo = lambda;
    double next = lambda - val / pp.d2p;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - lambda) < 1e-14 * std::max(1.0, std::abs(lambda)) ||
        hi - lo < 1e-13) {
      return next;
    }
    lambda = next;
  }
  throw NumericalGuardError("Legendre root find did not converge at rho=" +
                            std::to_string(rho));
}

std::size_t ThermoTable::locate(double rho) const {
  const double u = (rho - rho_min_) / h_;
  auto k = static_cast<std::ptrdiff_t>(std::floor(u));
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(rho_.size()) - 2);
  return static_cast<std::size_t>(k);
}

double ThermoTable::f(double rho) const {
  if (rho < 0.0 || rho > 1.0) throw std::out_of_range("f requires rho in [0,1]");
  if (rho == 0.0) return 0.0;
  if (rho == 1.0) return interaction_.coupling;  // one pair per site in 1-D
  if (rho < rho_min_ || rho > rho_max()) {
    const double lambda = chemical_potential(rho);
    return lambda * rho - fugacity_pressure(interaction_, lambda).p;
  }
  const std::size_t k = locate(rho);
  const double t = (rho - rho_[k]) / h_;
  return hermite(f_[k], f_[k + 1], fp_[k], fp_[k + 1], h_, t);
}

double ThermoTable::fprime(double rho) const {
  if (rho < rho_min_ - 1e-15 || rho > rho_max() + 1e-15) {
    throw std::out_of_range("f' queried outside the thermo table range at rho=" +
                            std::to_string(rho));
  }
  const std::size_t k = locate(rho);
  const double t = (rho - rho_[k]) / h_;
  return hermite(fp_[k], fp_[k + 1], fpp_[k], fpp_[k + 1], h_, t);
}

double ThermoTable::fsecond(double rho) const {
  if (rho < rho_min_ - 1e-15 || rho > rho_max() + 1e-15) {
    throw std::out_of_range("f'' queried outside the thermo table range at rho=" +
                            std::to_string(rho));
  }
  const std::size_t k = locate(rho);
  const double t = (rho - rho_[k]) / h_;
  return hermite(fpp_[k], fpp_[k + 1], fpp_slope_[k], fpp_slope_[k + 1], h_, t);
}

double ThermoTable::chi(double rho) const {
  if (rho <= 0.0 || rho >= 1.0) return 0.0;
  if (rho < rho_min_ || rho > rho_max()) {
    return fugacity_pressure(interaction_, chemical_potential(rho)).d2p;
  }
  const std::size_t k = locate(rho);
  const double t = (rho - rho_[k]) / h_;
  return hermite(chi_[k], chi_[k + 1], chi_slope_[k], chi_slope_[k + 1], h_, t);
}

double ThermoTable::inverse_fprime(double mu) const {
  return fugacity_pressure(interaction_, mu).dp;
}

double ThermoTable::excess(double rho, double rhobar) const {
  return f(rho) - f(rhobar) - fprime(rhobar) * (rho - rhobar);
}

double ThermoTable::min_second_difference() const {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < f_.size(); ++k) {
    lowest = std::min(lowest, f_[k + 1] - 2.0 * f_[k] + f_[k - 1]);
  }
  return lowest;
}

double ThermoTable::chi_bound_constant(double lo, double hi) const {
  double c = 1.0;
  for (std::size_t k = 0; k < rho_.size(); ++k) {
    const double rho = rho_[k];
    if (rho < lo || rho > hi) continue;
    const double ratio = chi_[k] / (rho * (1.0 - rho));
    c = std::max({c, ratio, 1.0 / ratio});
  }
  return c;
}

void ThermoTable::write_csv(std::ostream& out) const {
  out << "rho,f,fprime,fsecond,chi\n";
  for (std::size_t k = 0; k < rho_.size(); ++k) {
    out << fmt_double(rho_[k]) << ',' << fmt_double(f_[k]) << ','
        << fmt_double(fp_[k]) << ',' << fmt_double(fpp_[k]) << ','
        << fmt_double(chi_[k]) << '\n';
  }
}

ThermoTable free_energy_table(const Interaction& interaction,
                              ThermoTable::Options options) {
  ThermoTable table(interaction, options);
  // Discrete second differences of a convex function are O(h^2) positive;
  // allow rounding noise only.
  if (table.min_second_difference() < -1e-12) {
    throw NumericalGuardError(
        "tabulated free energy is not convex (chemical-potential sign bug?)");
  }
  return table;
}

double compressibility(const ThermoTable& thermo, double rho) {
  if (rho < 0.0 || rho > 1.0) {
    throw std::out_of_range("compressibility requires rho in [0,1]");
  }
  if (rho == 0.0 || rho == 1.0) return 0.0;
  return fugacity_pressure(thermo.interaction(), thermo.chemical_potential(rho)).d2p;
}

Eigen::VectorXd boltzmann_weights(std::span<const double> energies) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(energies.size()));
  if (energies.empty()) return w;
  const double lowest = *std::min_element(energies.begin(), energies.end());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = std::exp(-(energies[i] - lowest));
  }
  w /= w.sum();
  return w;
}

Eigen::VectorXd canonical_exact(const Interaction& interaction,
                                const Torus& torus, int K,
                                std::span<const double> external_potential) {
  if (!external_potential.empty() &&
      static_cast<int>(external_potential.size()) != torus.num_sites()) {
    throw std::invalid_argument("external potential size mismatch");
  }
  const std::vector<Configuration> sector = enumerate_sector(torus, K);
  std::vector<double> energy(sector.size());
  for (std::size_t i = 0; i < sector.size(); ++i) {
    double e = hamiltonian(interaction, torus, sector[i]);
    if (!external_potential.empty()) {
      for (int x = 0; x < torus.num_sites(); ++x) {
        if (sector[i][x]) e += external_potential[x];
      }
    }
    energy[i] = e;
  }
  return boltzmann_weights(energy);
}

namespace {

double window_sum(const Interaction& interaction,
                  const LocalObservable& observable, double rho,
                  const Torus& window, double lambda) {
  const int n = window.num_sites();
  const std::uint64_t total = std::uint64_t{1} << n;
  double num = 0.0;
  double den = 0.0;
  if (interaction.is_zero()) {
    for (std::uint64_t m = 0; m < total; ++m) {
      const Configuration eta = Configuration::from_mask(n, m);
      const int k = eta.count();
      const double w = std::pow(rho, k) * std::pow(1.0 - rho, n - k);
      if (w == 0.0) continue;
      num += w * observable(window, eta);
      den += w;
    }
  } else {
    for (std::uint64_t m = 0; m < total; ++m) {
      const Configuration eta = Configuration::from_mask(n, m);
      const double w =
          std::exp(-hamiltonian(interaction, window, eta) + lambda * eta.count());
      num += w * observable(window, eta);
      den += w;
    }
  }
  return num / den;
}

}  // namespace

WindowExpectation product_expectation(const Interaction& interaction,
                                      const LocalObservable& observable,
                                      double rho, const Torus& window,
                                      const ThermoTable* thermo) {
  if (rho < 0.0 || rho > 1.0) throw std::out_of_range("rho must lie in [0,1]");
  if (window.num_sites() > kMaxWindowSites) {
    throw SizeGuardError("expectation window limited to " +
                         std::to_string(kMaxWindowSites) + " sites");
  }
  WindowExpectation out;
  out.window_sites = window.num_sites();
  if (interaction.is_zero() || rho == 0.0 || rho == 1.0) {
    // mu_0, mu_1 are point masses; both are reached by the product weights.
    out.value = window_sum(Interaction::zero(), observable, rho, window, 0.0);
    return out;
  }
  if (thermo == nullptr) {
    throw std::invalid_argument(
        "interacting expectation needs a thermo table for f'(rho)");
  }
  const double lambda = thermo->fprime(rho);
  out.value = window_sum(interaction, observable, rho, window, lambda);
  if (window.side() >= 4) {
    const Torus half(window.dim(), window.side() / 2);
    out.truncation_error =
        std::abs(out.value - window_sum(interaction, observable, rho, half, lambda));
  }
  return out;
}

}  // namespace kawasaki
