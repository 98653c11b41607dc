#pragma once

// Geometry of the discrete torus T_N^d and bit-packed lattice-gas
// configurations.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace kawasaki {

constexpr int kMaxDim = 3;

using Coords = std::array<int, kMaxDim>;

/// Nearest-neighbour bond in canonical orientation (x, x + e_axis).
struct Bond {
  int x = 0;
  int axis = 0;  // 0-based; e_{axis+1} in the usual notation

  friend bool operator==(const Bond&, const Bond&) = default;
};

/// Discrete torus of side N in dimension d.
///
/// Sites are indexed row-major over coordinates: the last coordinate varies
/// fastest. Bonds are listed once per unordered pair of distinct neighbours;
/// for N >= 3 that is d*N^d bonds, for N = 2 the two periodic images of each
/// bond coincide and d*N^d/2 bonds remain.
class Torus {
 public:
  Torus(int d, int N);

  int dim() const { return d_; }
  int side() const { return n_; }
  int num_sites() const { return sites_; }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  Coords coords(int site) const;
  int site(const Coords& c) const;  // coordinates taken modulo N

  /// Site x + step*e_axis with periodic wraparound.
  int neighbor(int site, int axis, int step = 1) const;
  /// Site x + z, where z is itself a site index read as a displacement.
  int add(int x, int z) const;
  int negate(int z) const;

  const std::vector<Bond>& bonds() const { return bonds_; }
  const Bond& bond(int b) const { return bonds_[b]; }
  int head(const Bond& b) const { return b.x; }
  int tail(const Bond& b) const { return neighbor(b.x, b.axis, 1); }

  /// Distinct nearest neighbours of a site (fewer than 2d when N = 2).
  std::span<const int> neighbors(int site) const;

  /// Periodic l1 distance between two sites.
  int distance(int a, int b) const;

  friend bool operator==(const Torus& a, const Torus& b) {
    return a.d_ == b.d_ && a.n_ == b.n_;
  }

 private:
  int d_;
  int n_;
  int sites_;
  std::array<int, kMaxDim> stride_{};
  std::vector<Bond> bonds_;
  std::vector<int> nbr_offsets_;  // CSR offsets into nbr_
  std::vector<int> nbr_;
};

/// Validated factory; throws std::invalid_argument unless 1 <= d <= 3, N >= 2.
Torus make_torus(int d, int N);

/// Occupation numbers eta in {0,1}^{sites}, bit-packed in 64-bit words with a
/// cached particle count.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(int sites);
  static Configuration from_bits(std::span<const int> bits);
  static Configuration from_mask(int sites, std::uint64_t mask);

  int size() const { return sites_; }
  int count() const { return count_; }

  bool operator[](int x) const { return (words_[x >> 6] >> (x & 63)) & 1U; }
  int occ(int x) const { return (*this)[x] ? 1 : 0; }

  void set(int x, bool value);
  /// Swap occupancies of x and y in place.
  void swap_sites(int x, int y);

  /// Bit mask of the first 64 sites; only meaningful for size() <= 64.
  std::uint64_t mask() const { return words_.empty() ? 0 : words_[0]; }
  std::span<const std::uint64_t> words() const { return words_; }
  std::vector<int> bits() const;

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.sites_ == b.sites_ && a.words_ == b.words_;
  }

 private:
  int sites_ = 0;
  int count_ = 0;
  std::vector<std::uint64_t> words_;
};

/// eta^{x,y}: occupancies at the bond endpoints swapped.
Configuration exchange(const Torus& torus, const Configuration& config,
                       const Bond& bond);

/// (tau_z eta)_y = eta_{y+z}.
Configuration shift(const Torus& torus, const Configuration& config, int z);

/// Largest torus volume accepted by enumerate_sector.
constexpr int kMaxEnumerableSites = 28;

/// All configurations with exactly K particles, in increasing order of their
/// bit mask. Throws SizeGuardError when N^d > kMaxEnumerableSites.
std::vector<Configuration> enumerate_sector(const Torus& torus, int K);

/// Binomial coefficient as a double-free exact integer (n <= 62).
std::uint64_t binomial(int n, int k);

}  // namespace kawasaki
