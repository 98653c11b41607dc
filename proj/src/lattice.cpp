#include "kawasaki/lattice.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

#include "kawasaki/errors.hpp"

namespace kawasaki {

Torus::Torus(int d, int N) : d_(d), n_(N) {
  if (d < 1 || d > kMaxDim) {
    throw std::invalid_argument("torus dimension must be in [1,3], got " +
                                std::to_string(d));
  }
  if (N < 2) {
    throw std::invalid_argument("torus side must be >= 2, got " +
                                std::to_string(N));
  }
  sites_ = 1;
  for (int k = 0; k < d; ++k) sites_ *= N;
  int s = 1;
  for (int k = d - 1; k >= 0; --k) {
    stride_[k] = s;
    s *= N;
  }

  bonds_.reserve(static_cast<std::size_t>(d) * sites_);
  for (int x = 0; x < sites_; ++x) {
    const Coords c = coords(x);
    for (int a = 0; a < d; ++a) {
      // For N = 2 the bonds (x, x+e) and (x+e, x+2e) = (x+e, x) coincide.
      if (N == 2 && c[a] == 1) continue;
      bonds_.push_back({x, a});
    }
  }

  nbr_offsets_.assign(sites_ + 1, 0);
  for (int x = 0; x < sites_; ++x) {
    std::array<int, 2 * kMaxDim> buf{};
    int len = 0;
    for (int a = 0; a < d; ++a) {
      for (int step : {-1, 1}) {
        const int y = neighbor(x, a, step);
        if (std::find(buf.begin(), buf.begin() + len, y) == buf.begin() + len) {
          buf[len++] = y;
        }
      }
    }
    nbr_.insert(nbr_.end(), buf.begin(), buf.begin() + len);
    nbr_offsets_[x + 1] = static_cast<int>(nbr_.size());
  }
}

Coords Torus::coords(int site) const {
  Coords c{};
  for (int k = 0; k < d_; ++k) {
    c[k] = (site / stride_[k]) % n_;
  }
  return c;
}

int Torus::site(const Coords& c) const {
  int s = 0;
  for (int k = 0; k < d_; ++k) {
    int v = c[k] % n_;
    if (v < 0) v += n_;
    s += v * stride_[k];
  }
  return s;
}

int Torus::neighbor(int site, int axis, int step) const {
  const int c = (site / stride_[axis]) % n_;
  int m = (c + step) % n_;
  if (m < 0) m += n_;
  return site + (m - c) * stride_[axis];
}

int Torus::add(int x, int z) const {
  const Coords a = coords(x);
  const Coords b = coords(z);
  Coords c{};
  for (int k = 0; k < d_; ++k) c[k] = a[k] + b[k];
  return site(c);
}

int Torus::negate(int z) const {
  Coords c = coords(z);
  for (int k = 0; k < d_; ++k) c[k] = -c[k];
  return site(c);
}

std::span<const int> Torus::neighbors(int site) const {
  return {nbr_.data() + nbr_offsets_[site],
          static_cast<std::size_t>(nbr_offsets_[site + 1] - nbr_offsets_[site])};
}

int Torus::distance(int a, int b) const {
  const Coords ca = coords(a);
  const Coords cb = coords(b);
  int dist = 0;
  for (int k = 0; k < d_; ++k) {
    const int delta = std::abs(ca[k] - cb[k]);
    dist += std::min(delta, n_ - delta);
  }
  return dist;
}

Torus make_torus(int d, int N) { return Torus(d, N); }

Configuration::Configuration(int sites)
    : sites_(sites), words_((sites + 63) / 64, 0) {
  if (sites < 0) throw std::invalid_argument("negative configuration size");
}

Configuration Configuration::from_bits(std::span<const int> bits) {
  Configuration c(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) {
      throw std::invalid_argument("occupation numbers must be 0 or 1");
    }
    c.set(static_cast<int>(i), bits[i] == 1);
  }
  return c;
}

Configuration Configuration::from_mask(int sites, std::uint64_t mask) {
  if (sites > 64) throw std::invalid_argument("mask form limited to 64 sites");
  Configuration c(sites);
  if (sites < 64) mask &= (std::uint64_t{1} << sites) - 1;
  if (sites > 0) c.words_[0] = mask;
  c.count_ = std::popcount(mask);
  return c;
}

void Configuration::set(int x, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (x & 63);
  std::uint64_t& w = words_[x >> 6];
  const bool old = (w & bit) != 0;
  if (old == value) return;
  w ^= bit;
  count_ += value ? 1 : -1;
}

void Configuration::swap_sites(int x, int y) {
  const bool vx = (*this)[x];
  const bool vy = (*this)[y];
  if (vx == vy) return;
  words_[x >> 6] ^= std::uint64_t{1} << (x & 63);
  words_[y >> 6] ^= std::uint64_t{1} << (y & 63);
}

std::vector<int> Configuration::bits() const {
  std::vector<int> out(sites_);
  for (int x = 0; x < sites_; ++x) out[x] = occ(x);
  return out;
}

Configuration exchange(const Torus& torus, const Configuration& config,
                       const Bond& bond) {
  Configuration out = config;
  out.swap_sites(torus.head(bond), torus.tail(bond));
  return out;
}

Configuration shift(const Torus& torus, const Configuration& config, int z) {
  Configuration out(config.size());
  for (int y = 0; y < config.size(); ++y) {
    out.set(y, config[torus.add(y, z)]);
  }
  return out;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return r;
}

std::vector<Configuration> enumerate_sector(const Torus& torus, int K) {
  const int n = torus.num_sites();
  if (n > kMaxEnumerableSites) {
    throw SizeGuardError("sector enumeration limited to " +
                         std::to_string(kMaxEnumerableSites) + " sites, got " +
                         std::to_string(n));
  }
  if (K < 0 || K > n) {
    throw std::invalid_argument("particle number out of range");
  }
  std::vector<Configuration> out;
  out.reserve(binomial(n, K));
  if (K == 0) {
    out.push_back(Configuration(n));
    return out;
  }
  // Gosper's hack: next larger integer with the same popcount.
  std::uint64_t mask = (std::uint64_t{1} << K) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (mask < limit) {
    out.push_back(Configuration::from_mask(n, mask));
    const std::uint64_t c = mask & (~mask + 1);
    const std::uint64_t r = mask + c;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
  return out;
}

}  // namespace kawasaki
