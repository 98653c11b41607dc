#include "kawasaki/dynamics.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "kawasaki/errors.hpp"

namespace kawasaki {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace {

// Displacements with l1 norm <= radius in dimension d.
std::vector<Coords> l1_ball(int d, int radius) {
  std::vector<Coords> out;
  Coords c{};
  const int w = 2 * radius + 1;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= w;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    int norm = 0;
    for (int i = 0; i < d; ++i) {
      c[i] = rem % w - radius;
      rem /= w;
      norm += std::abs(c[i]);
    }
    if (norm <= radius) out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<int> witness_sites(const Torus& torus, const Bond& bond, int radius) {
  const int x = torus.head(bond);
  const int y = torus.tail(bond);
  std::vector<int> out;
  for (int end : {x, y}) {
    const Coords base = torus.coords(end);
    for (const Coords& delta : l1_ball(torus.dim(), radius)) {
      Coords c{};
      for (int i = 0; i < torus.dim(); ++i) c[i] = base[i] + delta[i];
      const int z = torus.site(c);
      if (z == x || z == y) continue;
      if (std::find(out.begin(), out.end(), z) == out.end()) out.push_back(z);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vec3 site_position(const Torus& torus, int site) {
  const Coords c = torus.coords(site);
  Vec3 r{};
  for (int i = 0; i < torus.dim(); ++i) {
    r[i] = (c[i] + 0.5) / torus.side();
  }
  return r;
}

double field_work(const FieldSpec& field, const Torus& torus, const Bond& bond,
                  bool reversed) {
  const Vec3 r = site_position(torus, torus.head(bond));
  const double w = field.work(std::span<const double>(r.data(), torus.dim()),
                              bond.axis, 1.0 / torus.side());
  return reversed ? -w : w;
}

double field_work(const FieldSpec& field, const Torus& torus, int x, int y) {
  for (int a = 0; a < torus.dim(); ++a) {
    if (torus.neighbor(x, a, 1) == y) return field_work(field, torus, Bond{x, a});
    if (torus.neighbor(x, a, -1) == y) {
      return field_work(field, torus, Bond{y, a}, true);
    }
  }
  throw std::invalid_argument("field_work: sites are not nearest neighbours");
}

namespace {

double prefactor(const RateFamily& family, const Torus& torus,
                 const Configuration& config, const Bond& bond) {
  if (family.kind == RateFamily::Kind::kHeatBath || family.a == 0.0) return 1.0;
  int occupied = 0;
  for (int z : witness_sites(torus, bond, family.witness_radius)) {
    occupied += config.occ(z);
  }
  return 1.0 + family.a * occupied;
}

}  // namespace

double rate_symmetric(const RateFamily& family, const Interaction& interaction,
                      const Torus& torus, const Configuration& config,
                      const Bond& bond) {
  const double dh = energy_diff(interaction, torus, config, bond);
  return prefactor(family, torus, config, bond) * std::exp(-0.5 * dh);
}

double rate_asymmetric(const RateFamily& family, const Interaction& interaction,
                       const FieldSpec& field, const Torus& torus,
                       const Configuration& config, const Bond& bond) {
  const double c0 = rate_symmetric(family, interaction, torus, config, bond);
  const int diff = config.occ(torus.head(bond)) - config.occ(torus.tail(bond));
  if (diff == 0) return c0;
  return c0 * std::exp(0.5 * field_work(field, torus, bond) * diff);
}

double rate_perturbed(const RateFamily& family, const Interaction& interaction,
                      const FieldSpec& field, const TimePotential& potential,
                      const Torus& torus, const Configuration& config,
                      const Bond& bond, double t) {
  const double base =
      rate_asymmetric(family, interaction, field, torus, config, bond);
  const int x = torus.head(bond);
  const int y = torus.tail(bond);
  const int diff = config.occ(y) - config.occ(x);
  if (diff == 0 || !potential) return base;
  const Vec3 rx = site_position(torus, x);
  const Vec3 ry = site_position(torus, y);
  const double hx = potential(t, std::span<const double>(rx.data(), torus.dim()));
  const double hy = potential(t, std::span<const double>(ry.data(), torus.dim()));
  // F(eta^{x,y}) - F(eta) = (H_x - H_y)(eta_y - eta_x)/2
  return base * std::exp(0.5 * (hx - hy) * diff);
}

SampledSitePotential::SampledSitePotential(const Torus& torus,
                                           std::vector<double> times,
                                           std::vector<Eigen::VectorXd> site_values)
    : times_(std::move(times)), values_(std::move(site_values)) {
  if (times_.empty() || times_.size() != values_.size()) {
    throw std::invalid_argument("sampled potential needs one slice per time");
  }
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) {
      throw std::invalid_argument("sampled potential times must increase");
    }
  }
  for (const auto& v : values_) {
    if (v.size() != torus.num_sites()) {
      throw std::invalid_argument("sampled potential slice has wrong size");
    }
    for (const Bond& b : torus.bonds()) {
      max_jump_ = std::max(max_jump_, std::abs(v[torus.tail(b)] - v[torus.head(b)]));
    }
  }
}

double SampledSitePotential::value(double t, int site) const {
  if (t <= times_.front()) return values_.front()[site];
  if (t >= times_.back()) return values_.back()[site];
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return (1.0 - w) * values_[k][site] + w * values_[k + 1][site];
}

FunctionSitePotential::FunctionSitePotential(const Torus& torus,
                                             TimePotential potential,
                                             double lipschitz)
    : d_(torus.dim()), potential_(std::move(potential)),
      bound_(lipschitz / torus.side()) {
  if (lipschitz < 0.0) throw std::invalid_argument("negative Lipschitz bound");
  positions_.reserve(torus.num_sites());
  for (int x = 0; x < torus.num_sites(); ++x) {
    positions_.push_back(site_position(torus, x));
  }
}

double FunctionSitePotential::value(double t, int site) const {
  return potential_(t, std::span<const double>(positions_[site].data(), d_));
}

RateModel::RateModel(Torus torus, Interaction interaction, RateFamily family,
                     FieldSpec field)
    : torus_(std::move(torus)),
      interaction_(interaction),
      family_(family),
      field_(std::move(field)) {
  if (field_.dim() != torus_.dim()) {
    throw std::invalid_argument("field and torus dimensions differ");
  }
  if (family_.a < 0.0) throw std::invalid_argument("rate parameter a must be >= 0");
  const int nb = torus_.num_bonds();
  head_.resize(nb);
  tail_.resize(nb);
  work_.resize(nb);
  witness_offsets_.assign(nb + 1, 0);
  std::vector<std::vector<int>> by_site(torus_.num_sites());
  const bool weighted =
      family_.kind == RateFamily::Kind::kNeighborWeighted && family_.a != 0.0;
  for (int b = 0; b < nb; ++b) {
    const Bond& bond = torus_.bond(b);
    head_[b] = torus_.head(bond);
    tail_[b] = torus_.tail(bond);
    work_[b] = field_work(field_, torus_, bond);
    std::vector<int> deps{head_[b], tail_[b]};
    if (weighted) {
      const std::vector<int> w = witness_sites(torus_, bond, family_.witness_radius);
      witnesses_.insert(witnesses_.end(), w.begin(), w.end());
      deps.insert(deps.end(), w.begin(), w.end());
    }
    witness_offsets_[b + 1] = static_cast<int>(witnesses_.size());
    if (!interaction_.is_zero()) {
      for (int end : {head_[b], tail_[b]}) {
        for (int z : torus_.neighbors(end)) deps.push_back(z);
      }
    }
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    for (int z : deps) by_site[z].push_back(b);
  }
  dep_offsets_.assign(torus_.num_sites() + 1, 0);
  for (int z = 0; z < torus_.num_sites(); ++z) {
    deps_.insert(deps_.end(), by_site[z].begin(), by_site[z].end());
    dep_offsets_[z + 1] = static_cast<int>(deps_.size());
  }
}

void RateModel::set_perturbation(std::shared_ptr<const SitePotential> potential) {
  potential_ = std::move(potential);
  thinning_ = potential_ ? std::exp(0.5 * potential_->max_bond_jump()) : 1.0;
}

double RateModel::symmetric(const Configuration& eta, int bond) const {
  double pref = 1.0;
  if (family_.kind == RateFamily::Kind::kNeighborWeighted && family_.a != 0.0) {
    int occupied = 0;
    for (int k = witness_offsets_[bond]; k < witness_offsets_[bond + 1]; ++k) {
      occupied += eta.occ(witnesses_[k]);
    }
    pref += family_.a * occupied;
  }
  if (interaction_.is_zero()) return pref;
  const double dh = energy_diff(interaction_, torus_, eta, torus_.bond(bond));
  return pref * std::exp(-0.5 * dh);
}

double RateModel::rate(const Configuration& eta, int bond) const {
  if (override_) return override_(eta, bond);
  const int diff = eta.occ(head_[bond]) - eta.occ(tail_[bond]);
  const double c0 = symmetric(eta, bond);
  if (diff == 0) return c0;
  return c0 * std::exp(0.5 * work_[bond] * diff);
}

double RateModel::rate_at(const Configuration& eta, int bond, double t) const {
  const double base = rate(eta, bond);
  if (!potential_) return base;
  const int x = head_[bond];
  const int y = tail_[bond];
  const int diff = eta.occ(y) - eta.occ(x);
  if (diff == 0) return base;
  const double jump = potential_->value(t, x) - potential_->value(t, y);
  return base * std::exp(0.5 * jump * diff);
}

std::span<const int> RateModel::dependents(int site) const {
  return {deps_.data() + dep_offsets_[site],
          static_cast<std::size_t>(dep_offsets_[site + 1] - dep_offsets_[site])};
}

SectorGenerator generator_matrix(const Torus& torus, int K, const BondRate& rate) {
  SectorGenerator out;
  out.states = enumerate_sector(torus, K);
  const std::size_t n = out.states.size();
  if (n > static_cast<std::size_t>(kMaxGeneratorStates)) {
    throw SizeGuardError("sector has " + std::to_string(n) +
                         " states; generator limited to " +
                         std::to_string(kMaxGeneratorStates));
  }
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    index.emplace(out.states[i].mask(), static_cast<int>(i));
  }
  const double speed = static_cast<double>(torus.side()) * torus.side();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * (torus.num_bonds() / 2 + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const Configuration& eta = out.states[i];
    double diag = 0.0;
    for (int b = 0; b < torus.num_bonds(); ++b) {
      const Bond& bond = torus.bond(b);
      if (eta[torus.head(bond)] == eta[torus.tail(bond)]) continue;
      const double r = speed * rate(eta, b);
      const int j = index.at(exchange(torus, eta, bond).mask());
      trip.emplace_back(static_cast<int>(i), j, r);
      diag -= r;
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
  }
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  return out;
}

SectorGenerator generator_matrix(const RateModel& model, int K) {
  return generator_matrix(model.torus(), K, [&model](const Configuration& eta, int b) {
    return model.rate(eta, b);
  });
}

StationaryResult stationary_exact(const SectorGenerator& generator) {
  const auto& Q = generator.matrix;
  const Eigen::Index n = Q.rows();
  if (n == 0) throw std::invalid_argument("empty generator");
  StationaryResult out;
  if (n == 1) {
    out.distribution = Eigen::VectorXd::Ones(1);
    return out;
  }
  // Irreducibility: every state reachable from state 0 along positive rates.
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Eigen::Index> todo;
  todo.push(0);
  seen[0] = 1;
  Eigen::Index reached = 1;
  while (!todo.empty()) {
    const Eigen::Index i = todo.front();
    todo.pop();
    for (RowSparse::InnerIterator it(Q, i); it; ++it) {
      if (it.col() != i && it.value() > 0.0 && !seen[it.col()]) {
        seen[it.col()] = 1;
        ++reached;
        todo.push(it.col());
      }
    }
  }
  if (reached != n) {
    throw NumericalGuardError("generator is reducible: " + std::to_string(reached) +
                              " of " + std::to_string(n) + " states reachable");
  }

  // Solve Q^T pi = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(Q.nonZeros() + n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (RowSparse::InnerIterator it(Q, i); it; ++it) {
      if (it.col() != n - 1) trip.emplace_back(it.col(), i, it.value());
    }
    trip.emplace_back(n - 1, i, 1.0);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw NumericalGuardError("sparse LU failed on the stationary system");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  out.distribution = lu.solve(rhs);
  const Eigen::VectorXd res = Q.transpose() * out.distribution;
  out.residual = res.cwiseAbs().maxCoeff();
  double scale = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(Q.coeff(i, i)));
  if (out.residual > 1e-10 * scale) {
    throw NumericalGuardError("stationary solve residual too large");
  }
  return out;
}

double detailed_balance_residual(const SectorGenerator& generator,
                                 const Eigen::VectorXd& pi) {
  const auto& Q = generator.matrix;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (RowSparse::InnerIterator it(Q, i); it; ++it) {
      const Eigen::Index j = it.col();
      if (j == i) continue;
      worst = std::max(worst, std::abs(pi[i] * it.value() - pi[j] * Q.coeff(j, i)));
    }
  }
  return worst;
}

}  // namespace kawasaki
