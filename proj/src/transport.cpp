#include "kawasaki/transport.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kawasaki/errors.hpp"
#include "kawasaki/interp.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

double kappa(const Interaction& interaction, double rho, int axis, int d,
             const ThermoTable* thermo) {
  if (axis < 0 || axis >= d) throw std::invalid_argument("kappa: axis out of range");
  if (rho <= 0.0 || rho >= 1.0) return 0.0;
  static constexpr int kSide[4] = {0, 16, 4, 2};
  const Torus window(d, kSide[d]);
  const int e = window.neighbor(0, axis, 1);
  const LocalObservable obs = [e](const Torus&, const Configuration& eta) {
    const double diff = eta.occ(0) - eta.occ(e);
    return diff * diff;
  };
  return product_expectation(interaction, obs, rho, window, thermo).value;
}

namespace {

// Sup-norm box of radius k in dimension d.
std::vector<Coords> box(int d, int k) {
  std::vector<Coords> out;
  const int w = 2 * k + 1;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= w;
  for (int idx = 0; idx < total; ++idx) {
    Coords c{};
    int rem = idx;
    for (int i = d - 1; i >= 0; --i) {
      c[i] = rem % w - k;
      rem /= w;
    }
    out.push_back(c);
  }
  return out;
}

Coords plus(const Coords& a, const Coords& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}


using Translates = std::vector<std::vector<Coords>>;

// Gram matrix over [v_1..v_d | f(s), s in {0,1}^S] by enumerating every
// configuration of the window under its grand-canonical Gibbs weight.
Eigen::MatrixXd window_gram(const RateFamily& family, const Interaction& interaction,
                            const Torus& torus, const std::vector<int>& window,
                            const std::vector<Coords>& support,
                            const Translates& translates, double lambda) {
  const int d = torus.dim();
  const int W = static_cast<int>(window.size());
  const int S = static_cast<int>(support.size());
  const int n = d + (1 << S);
  std::map<int, int> bit_of;  // torus site -> window bit
  for (int j = 0; j < W; ++j) bit_of[window[j]] = j;
  std::vector<std::vector<std::vector<int>>> support_bits(d);
  for (int i = 0; i < d; ++i) {
    for (const Coords& x : translates[i]) {
      std::vector<int> bits;
      for (const Coords& s : support) bits.push_back(bit_of.at(torus.site(plus(x, s))));
      support_bits[i].push_back(std::move(bits));
    }
  }

  std::vector<double> weight(std::size_t{1} << W);
  if (d == 1) {
    // The infinite-volume chain is a two-state Markov chain built from the
    // transfer matrix, so its marginal on the (contiguous) window is exact.
    auto centred = [&](int site) {
      const int c = torus.coords(site)[0];
      return 2 * c < torus.side() ? c : c - torus.side();
    };
    std::vector<int> order(W);
    for (int j = 0; j < W; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return centred(window[a]) < centred(window[b]); });
    for (int j = 1; j < W; ++j) {
      const int gap = centred(window[order[j]]) - centred(window[order[j - 1]]);
      if (gap != 1) throw std::logic_error("mobility window is not an interval");
    }
    Eigen::Matrix2d T;
    T << 1.0, std::exp(0.5 * lambda), std::exp(0.5 * lambda),
        std::exp(lambda - interaction.coupling);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(T);
    const double l = es.eigenvalues()[1];
    const Eigen::Vector2d v = es.eigenvectors().col(1).cwiseAbs();
    const Eigen::Vector2d pi = v.cwiseProduct(v) / v.squaredNorm();
    Eigen::Matrix2d P;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) P(a, b) = T(a, b) * v[b] / (l * v[a]);
    }
    for (std::size_t m = 0; m < weight.size(); ++m) {
      int prev = (m >> order[0]) & 1U;
      double w = pi[prev];
      for (int j = 1; j < W; ++j) {
        const int cur = (m >> order[j]) & 1U;
        w *= P(prev, cur);
        prev = cur;
      }
      weight[m] = w;
    }
  } else {
    // Free-boundary grand-canonical window (an approximation of the
    // infinite-volume measure).
    std::vector<std::pair<int, int>> inner_bonds;
    for (int a = 0; a < W; ++a) {
      for (int z : torus.neighbors(window[a])) {
        const auto it = bit_of.find(z);
        if (it != bit_of.end() && it->second > a) inner_bonds.emplace_back(a, it->second);
      }
    }
    double top = -1e300;
    for (std::size_t m = 0; m < weight.size(); ++m) {
      double h = 0.0;
      for (auto [a, b] : inner_bonds) h += ((m >> a) & 1U) && ((m >> b) & 1U) ? 1.0 : 0.0;
      weight[m] = -interaction.coupling * h + lambda * std::popcount(m);
      top = std::max(top, weight[m]);
    }
    double total = 0.0;
    for (double& w : weight) {
      w = std::exp(w - top);
      total += w;
    }
    for (double& w : weight) w /= total;
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd ell(n);
  Configuration eta(torus.num_sites());
  for (std::size_t m = 0; m < weight.size(); ++m) {
    for (int j = 0; j < W; ++j) eta.set(window[j], (m >> j) & 1U);
    for (int i = 0; i < d; ++i) {
      const Bond bond{torus.site(Coords{}), i};
      const int b0 = bit_of.at(torus.head(bond));
      const int b1 = bit_of.at(torus.tail(bond));
      const int a = static_cast<int>((m >> b1) & 1U) - static_cast<int>((m >> b0) & 1U);
      if (a == 0) continue;  // eta^{0,e} = eta: the integrand vanishes
      const double c0 = rate_symmetric(family, interaction, torus, eta, bond);
      const std::size_t swapped = m ^ ((std::size_t{1} << b0) | (std::size_t{1} << b1));
      ell.setZero();
      ell[i] = a;
      for (const auto& bits : support_bits[i]) {
        int s_new = 0;
        int s_old = 0;
        for (int q = 0; q < S; ++q) {
          s_new |= static_cast<int>((swapped >> bits[q]) & 1U) << q;
          s_old |= static_cast<int>((m >> bits[q]) & 1U) << q;
        }
        if (s_new == s_old) continue;
        ell[d + s_new] += 1.0;
        ell[d + s_old] -= 1.0;
      }
      A.selfadjointView<Eigen::Lower>().rankUpdate(ell, 0.5 * weight[m] * c0);
    }
  }
  return A.selfadjointView<Eigen::Lower>();
}

// Same Gram matrix under the Bernoulli product measure. Every entry is a sum
// over pairs of translates of expectations of cylinder indicators, and the
// prefactor is affine in the witness occupations, so each term is a product
// of site marginals over the union of the two boxes and the bond.
Eigen::MatrixXd product_gram(const RateFamily& family, const Torus& torus,
                             const std::vector<Coords>& support,
                             const Translates& translates, double rho) {
  const int d = torus.dim();
  const int S = static_cast<int>(support.size());
  const int nf = 1 << S;
  const int n = d + nf;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const bool weighted =
      family.kind == RateFamily::Kind::kNeighborWeighted && family.a != 0.0;

  for (int i = 0; i < d; ++i) {
    const Bond bond{torus.site(Coords{}), i};
    const int x0 = torus.head(bond);
    const int x1 = torus.tail(bond);
    std::vector<int> local;  // union of all sites touched for this axis
    auto index_of = [&local](int site) {
      const auto it = std::find(local.begin(), local.end(), site);
      if (it != local.end()) return static_cast<int>(it - local.begin());
      local.push_back(site);
      return static_cast<int>(local.size()) - 1;
    };
    const int u0 = index_of(x0);
    const int u1 = index_of(x1);
    std::uint64_t wmask = 0;
    if (weighted) {
      for (int z : witness_sites(torus, bond, family.witness_radius)) {
        wmask |= std::uint64_t{1} << index_of(z);
      }
    }
    struct Box {
      std::uint64_t fixed = 0;
      std::vector<std::uint64_t> ones;  // per block state s
      std::vector<int> swapped;         // block state after the bond exchange
    };
    std::vector<Box> boxes;
    for (const Coords& x : translates[i]) {
      std::vector<int> pos;
      for (const Coords& s : support) pos.push_back(index_of(torus.site(plus(x, s))));
      Box b;
      for (int p : pos) b.fixed |= std::uint64_t{1} << p;
      b.ones.resize(nf);
      b.swapped.resize(nf);
      for (int s = 0; s < nf; ++s) {
        std::uint64_t m = 0;
        int t = s;
        for (int q = 0; q < S; ++q) {
          if ((s >> q) & 1) m |= std::uint64_t{1} << pos[q];
          if (pos[q] == u0 || pos[q] == u1) t ^= 1 << q;
        }
        b.ones[s] = m;
        b.swapped[s] = t;
      }
      boxes.push_back(std::move(b));
    }
    if (local.size() > 64) throw SizeGuardError("mobility: too many sites for bit masks");

    std::vector<double> pw1(65), pw0(65);
    for (int q = 0; q <= 64; ++q) {
      pw1[q] = std::pow(rho, q);
      pw0[q] = std::pow(1.0 - rho, q);
    }
    const std::uint64_t bfix = (std::uint64_t{1} << u0) | (std::uint64_t{1} << u1);
    // E[c0; event] for the event "sites in `fixed` take the values in `ones`".
    auto expect = [&](std::uint64_t fixed, std::uint64_t ones) {
      const int n1 = std::popcount(ones);
      const int n0 = std::popcount(fixed) - n1;
      double c0 = 1.0;
      if (weighted) {
        c0 += family.a * (std::popcount(ones & wmask) +
                          rho * std::popcount(wmask & ~fixed));
      }
      return pw1[n1] * pw0[n0] * c0;
    };

    for (int occ0 : {0, 1}) {
      const std::uint64_t bones = occ0 == 1 ? (std::uint64_t{1} << u0)
                                            : (std::uint64_t{1} << u1);
      const double a = occ0 == 1 ? -1.0 : 1.0;  // eta_{e} - eta_0
      // block states compatible with this bond assignment
      std::vector<std::vector<int>> compatible(boxes.size());
      for (std::size_t bx = 0; bx < boxes.size(); ++bx) {
        const Box& b = boxes[bx];
        for (int s = 0; s < nf; ++s) {
          if (((b.ones[s] ^ bones) & b.fixed & bfix) == 0) compatible[bx].push_back(s);
        }
      }
      A(i, i) += 0.5 * expect(bfix, bones);
      for (std::size_t bx = 0; bx < boxes.size(); ++bx) {
        const Box& b = boxes[bx];
        for (int s : compatible[bx]) {
          const double w = 0.5 * a * expect(b.fixed | bfix, b.ones[s] | bones);
          A(d + b.swapped[s], i) += w;
          A(d + s, i) -= w;
        }
      }
      for (std::size_t bx = 0; bx < boxes.size(); ++bx) {
        const Box& b = boxes[bx];
        for (std::size_t by = 0; by < boxes.size(); ++by) {
          const Box& c = boxes[by];
          const std::uint64_t shared = b.fixed & c.fixed;
          const std::uint64_t fixed = b.fixed | c.fixed | bfix;
          for (int s : compatible[bx]) {
            const std::uint64_t ms = b.ones[s] | bones;
            const int ns = d + b.swapped[s];
            const int os = d + s;
            for (int t : compatible[by]) {
              if (((b.ones[s] ^ c.ones[t]) & shared) != 0) continue;
              const double w = 0.5 * expect(fixed, ms | c.ones[t]);
              const int nt = d + c.swapped[t];
              const int ot = d + t;
              A(ns, nt) += w;
              A(os, ot) += w;
              A(ns, ot) -= w;
              A(os, nt) -= w;
            }
          }
        }
      }
    }
  }
  A.topRightCorner(d, nf) = A.bottomLeftCorner(nf, d).transpose();
  return A;
}
}  // namespace

MobilityResult mobility_variational(const RateFamily& family,
                                    const Interaction& interaction, double rho,
                                    int support_radius, int d,
                                    const ThermoTable* thermo) {
  if (d < 1 || d > 3) throw std::invalid_argument("mobility: d must be 1..3");
  if (support_radius < 0) throw std::invalid_argument("support radius must be >= 0");
  if (rho < 0.0 || rho > 1.0) throw std::out_of_range("rho must lie in [0,1]");
  const int k = support_radius;
  MobilityResult out;
  out.support_radius = k;
  out.sigma = Eigen::MatrixXd::Zero(d, d);
  out.sigma_f0 = Eigen::MatrixXd::Zero(d, d);
  out.exact_measure = interaction.is_zero() || d == 1;

  // Embedding torus large enough that the window never wraps.
  const int reach = std::max({2 * k, family.witness_radius, 1}) + 1;
  const Torus torus(d, 2 * reach + 4);

  const std::vector<Coords> support = box(d, k);
  std::vector<int> window;  // torus sites of the enumerated window
  auto add_site = [&](const Coords& c) {
    const int s = torus.site(c);
    if (std::find(window.begin(), window.end(), s) == window.end()) window.push_back(s);
  };
  // Per axis: translates x whose support x + Lambda_k meets the bond {0, e_i}.
  std::vector<std::vector<Coords>> translates(d);
  for (int i = 0; i < d; ++i) {
    Coords e{};
    e[i] = 1;
    std::vector<Coords> xs;
    for (const Coords& s : support) {
      for (const Coords& base : {Coords{}, e}) {
        const Coords x = plus(base, Coords{-s[0], -s[1], -s[2]});
        if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
      }
    }
    translates[i] = xs;
    for (const Coords& x : xs) {
      for (const Coords& s : support) add_site(plus(x, s));
    }
    const Bond bond{torus.site(Coords{}), i};
    add_site(Coords{});
    add_site(e);
    if (family.kind == RateFamily::Kind::kNeighborWeighted && family.a != 0.0) {
      for (int z : witness_sites(torus, bond, family.witness_radius)) {
        add_site(torus.coords(z));
      }
    }
    if (!interaction.is_zero()) {
      for (int end : {torus.head(bond), torus.tail(bond)}) {
        for (int z : torus.neighbors(end)) add_site(torus.coords(z));
      }
    }
  }
  const int W = static_cast<int>(window.size());
  out.window_sites = W;
  const int S = static_cast<int>(support.size());
  const int nf = 1 << S;
  Eigen::MatrixXd A;
  if (interaction.is_zero()) {
    // Product measure: exact pairwise assembly, no window enumeration.
    if (S > kMaxProductSupport) {
      throw SizeGuardError("support box has " + std::to_string(S) + " sites; limit is " +
                           std::to_string(kMaxProductSupport));
    }
    out.unknowns = nf;
    if (rho == 0.0 || rho == 1.0) return out;
    A = product_gram(family, torus, support, translates, rho);
  } else {
    if (W > kMaxMobilityWindow) {
      throw SizeGuardError("mobility window has " + std::to_string(W) +
                           " sites; enumeration limited to " +
                           std::to_string(kMaxMobilityWindow));
    }
    if (S > 16) throw SizeGuardError("support box too large for enumeration");
    out.unknowns = nf;
    if (rho == 0.0 || rho == 1.0) return out;
    if (thermo == nullptr) {
      throw std::invalid_argument("interacting mobility needs a thermo table");
    }
    A = window_gram(family, interaction, torus, window, support, translates,
                    thermo->chemical_potential(rho));
  }
  const Eigen::MatrixXd Avv = A.topLeftCorner(d, d);
  out.sigma_f0 = 0.5 * (Avv + Avv.transpose());
  const Eigen::MatrixXd Aff = A.bottomRightCorner(nf, nf);
  const Eigen::MatrixXd Afv = A.bottomLeftCorner(nf, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Aff);
  if (es.info() != Eigen::Success) throw NumericalGuardError("mobility eigen-solve failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  const double cut = 1e-12 * lmax;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(nf);
  double lmin_kept = lmax;
  for (int q = 0; q < nf; ++q) {
    if (lam[q] > cut) {
      inv[q] = 1.0 / lam[q];
      ++out.rank;
      lmin_kept = std::min(lmin_kept, lam[q]);
    }
  }
  out.condition = out.rank > 0 ? lmax / lmin_kept : 1.0;
  const Eigen::MatrixXd P = es.eigenvectors().transpose() * Afv;
  const Eigen::MatrixXd correction = P.transpose() * inv.asDiagonal() * P;
  Eigen::MatrixXd sigma = Avv - correction;
  out.sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gain(out.sigma_f0 - out.sigma);
  out.improvement = gain.eigenvalues().maxCoeff();
  return out;
}

MobilityModel MobilityModel::ssep() {
  MobilityModel m;
  m.kind_ = Kind::kSsep;
  return m;
}

MobilityModel MobilityModel::user(std::function<double(double)> sigma,
                                  std::function<double(double)> dsigma) {
  MobilityModel m;
  m.kind_ = Kind::kUser;
  m.sigma_fn_ = std::move(sigma);
  m.dsigma_fn_ = std::move(dsigma);
  return m;
}

MobilityModel MobilityModel::variational(const RateFamily& family,
                                         const Interaction& interaction,
                                         int support_radius, int points,
                                         const ThermoTable* thermo) {
  if (points < 3) throw std::invalid_argument("mobility table needs >= 3 points");
  MobilityModel m;
  m.kind_ = Kind::kVariational;
  const double h = 1.0 / (points - 1);
  for (int q = 0; q < points; ++q) {
    const double rho = q * h;
    m.grid_.push_back(rho);
    const ThermoTable* t = thermo;
    const bool inside = thermo == nullptr ||
                        (rho >= thermo->rho_min() && rho <= thermo->rho_max());
    if (!inside) t = nullptr;
    double s = 0.0;
    if (rho > 0.0 && rho < 1.0 && (interaction.is_zero() || t != nullptr)) {
      s = mobility_variational(family, interaction, rho, support_radius, 1, t).sigma(0, 0);
    }
    m.table_.push_back(s);
  }
  m.slopes_ = pchip_slopes(m.table_, h);
  return m;
}

double MobilityModel::sigma(double rho) const {
  switch (kind_) {
    case Kind::kSsep:
      return rho * (1.0 - rho);
    case Kind::kUser:
      return sigma_fn_(rho);
    case Kind::kVariational: {
      const double r = std::clamp(rho, 0.0, 1.0);
      const double h = grid_[1] - grid_[0];
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(r / h), grid_.size() - 2);
      return hermite(table_[k], table_[k + 1], slopes_[k], slopes_[k + 1], h,
                     (r - grid_[k]) / h);
    }
  }
  return 0.0;
}

double MobilityModel::dsigma(double rho) const {
  switch (kind_) {
    case Kind::kSsep:
      return 1.0 - 2.0 * rho;
    case Kind::kUser:
      return dsigma_fn_(rho);
    case Kind::kVariational: {
      const double r = std::clamp(rho, 0.0, 1.0);
      const double h = grid_[1] - grid_[0];
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(r / h), grid_.size() - 2);
      return hermite_slope(table_[k], table_[k + 1], slopes_[k], slopes_[k + 1], h,
                           (r - grid_[k]) / h);
    }
  }
  return 0.0;
}

double diffusion(const MobilityModel& mobility, const ThermoTable& thermo, double rho) {
  return mobility.sigma(rho) * thermo.fsecond(rho);
}

Eigen::MatrixXd diffusion_matrix(const Eigen::MatrixXd& sigma,
                                 const ThermoTable& thermo, double rho) {
  return sigma * thermo.fsecond(rho);
}

void write_transport_csv(std::ostream& out, const std::vector<double>& rho,
                         const std::vector<Eigen::MatrixXd>& sigma,
                         const ThermoTable& thermo) {
  if (rho.size() != sigma.size() || rho.empty()) {
    throw std::invalid_argument("transport table size mismatch");
  }
  const int d = static_cast<int>(sigma[0].rows());
  out << "rho";
  for (const char* name : {"sigma", "D"}) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) out << ',' << name << '_' << i + 1 << j + 1;
    }
  }
  out << '\n';
  for (std::size_t q = 0; q < rho.size(); ++q) {
    const bool interior = rho[q] >= thermo.rho_min() && rho[q] <= thermo.rho_max();
    out << fmt_double(rho[q]);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) out << ',' << fmt_double(sigma[q](i, j));
    }
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        out << ','
            << (interior ? fmt_double(sigma[q](i, j) * thermo.fsecond(rho[q])) : "nan");
      }
    }
    out << '\n';
  }
}

}  // namespace kawasaki
