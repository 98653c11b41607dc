#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <stdexcept>

#include "kawasaki/errors.hpp"
#include "kawasaki/lattice.hpp"
#include "kawasaki/rng.hpp"

using namespace kawasaki;

namespace {

Configuration random_config(int sites, Rng& rng) {
  Configuration c(sites);
  for (int x = 0; x < sites; ++x) c.set(x, rng.bernoulli(0.4));
  return c;
}

}  // namespace

TEST_CASE("torus geometry") {
  const Torus t(2, 5);
  CHECK(t.num_sites() == 25);
  CHECK(t.num_bonds() == 50);
  for (int x = 0; x < t.num_sites(); ++x) {
    CHECK(t.site(t.coords(x)) == x);
    CHECK(t.neighbors(x).size() == 4);
    for (int i = 0; i < 2; ++i) CHECK(t.neighbor(t.neighbor(x, i, 1), i, -1) == x);
  }
  // last coordinate fastest
  CHECK(t.coords(1) == Coords{0, 1, 0});
  CHECK(t.site(Coords{-1, 7, 0}) == t.site(Coords{4, 2, 0}));
  CHECK(t.distance(t.site(Coords{0, 0, 0}), t.site(Coords{4, 3, 0})) == 3);
}

TEST_CASE("N = 2 bonds are not double counted") {
  const Torus t(1, 2);
  CHECK(t.num_bonds() == 1);
  CHECK(t.neighbors(0).size() == 1);
  CHECK(Torus(2, 2).num_bonds() == 4);
  CHECK(Torus(3, 4).num_bonds() == 3 * 64);
}

TEST_CASE("factory validates its arguments") {
  CHECK_THROWS_AS(make_torus(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_torus(4, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_torus(1, 1), std::invalid_argument);
  CHECK_NOTHROW(make_torus(3, 2));
}

TEST_CASE("configuration bit packing across word boundaries") {
  Configuration c(130);
  for (int x : {0, 63, 64, 127, 129}) c.set(x, true);
  CHECK(c.count() == 5);
  c.set(63, true);
  CHECK(c.count() == 5);
  c.set(64, false);
  CHECK(c.count() == 4);
  CHECK(c[129]);
  CHECK_FALSE(c[128]);
  c.swap_sites(0, 128);
  CHECK(c[128]);
  CHECK_FALSE(c[0]);
  CHECK(c.count() == 4);
  const auto bits = c.bits();
  CHECK(Configuration::from_bits(bits) == c);
  CHECK(Configuration::from_mask(6, 0b101101).count() == 4);
}

TEST_CASE("property: exchange is an involution preserving particle number") {
  Rng rng(11);
  for (int d : {1, 2, 3}) {
    const Torus t(d, d == 3 ? 3 : 6);
    for (int trial = 0; trial < 20; ++trial) {
      const Configuration c = random_config(t.num_sites(), rng);
      for (const Bond& b : t.bonds()) {
        const Configuration e = exchange(t, c, b);
        CHECK(e.count() == c.count());
        CHECK(exchange(t, e, b) == c);
        CHECK(e.occ(t.head(b)) == c.occ(t.tail(b)));
      }
    }
  }
}

TEST_CASE("property: shifts form the torus group") {
  Rng rng(12);
  const Torus t(2, 4);
  for (int trial = 0; trial < 10; ++trial) {
    const Configuration c = random_config(t.num_sites(), rng);
    CHECK(shift(t, c, 0) == c);
    for (int z = 0; z < t.num_sites(); ++z) {
      const Configuration sz = shift(t, c, z);
      CHECK(shift(t, sz, t.negate(z)) == c);
      for (int w : {1, 5, 11}) {
        CHECK(shift(t, sz, w) == shift(t, c, t.add(z, w)));
      }
      // (tau_z eta)_y = eta_{y+z}
      for (int y = 0; y < t.num_sites(); ++y) CHECK(sz.occ(y) == c.occ(t.add(y, z)));
    }
  }
}

TEST_CASE("sector enumeration matches binomial counts") {
  CHECK(binomial(10, 3) == 120);
  CHECK(binomial(62, 31) == 465428353255261088ULL);
  CHECK(binomial(5, 7) == 0);
  for (int N : {4, 6, 8}) {
    const Torus t(1, N);
    for (int K = 0; K <= N; ++K) {
      const auto sector = enumerate_sector(t, K);
      CHECK(sector.size() == binomial(N, K));
      std::set<std::uint64_t> masks;
      for (std::size_t i = 0; i < sector.size(); ++i) {
        CHECK(sector[i].count() == K);
        if (i > 0) CHECK(sector[i - 1].mask() < sector[i].mask());
        masks.insert(sector[i].mask());
      }
      CHECK(masks.size() == sector.size());
    }
  }
  CHECK_THROWS_AS(enumerate_sector(Torus(1, 30), 3), SizeGuardError);
}

TEST_CASE("stream seeds are distinct and deterministic") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(stream_seed(42, k));
  CHECK(seen.size() == 1000);
  CHECK(stream_seed(42, 3) == stream_seed(42, 3));
  CHECK(stream_seed(42, 3) != stream_seed(43, 3));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
