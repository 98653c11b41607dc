#include "kawasaki/kmc.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "kawasaki/errors.hpp"
#include "kawasaki/io.hpp"

namespace kawasaki {

FenwickTree::FenwickTree(int n) : n_(n), tree_(n + 1, 0.0), leaf_(n, 0.0) {
  while (top_bit_ * 2 <= n_) top_bit_ *= 2;
}

void FenwickTree::set(int i, double value) {
  const double delta = value - leaf_[i];
  if (delta == 0.0) return;
  leaf_[i] = value;
  total_ += delta;
  for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += delta;
}

void FenwickTree::rebuild() {
  std::fill(tree_.begin(), tree_.end(), 0.0);
  for (int i = 0; i < n_; ++i) tree_[i + 1] = leaf_[i];
  for (int k = 1; k <= n_; ++k) {
    const int parent = k + (k & -k);
    if (parent <= n_) tree_[parent] += tree_[k];
  }
  total_ = 0.0;
  for (double v : leaf_) total_ += v;
}

int FenwickTree::find(double u) const {
  int pos = 0;
  for (int step = top_bit_; step > 0; step >>= 1) {
    const int next = pos + step;
    if (next <= n_ && tree_[next] <= u) {
      pos = next;
      u -= tree_[next];
    }
  }
  // Rounding can land on a zero leaf or run off the end; move to the nearest
  // positive one.
  if (pos >= n_) pos = n_ - 1;
  if (leaf_[pos] > 0.0) return pos;
  for (int i = pos + 1; i < n_; ++i) {
    if (leaf_[i] > 0.0) return i;
  }
  for (int i = pos - 1; i >= 0; --i) {
    if (leaf_[i] > 0.0) return i;
  }
  return -1;
}

KmcEngine::KmcEngine(const RateModel& model, Configuration initial,
                     std::uint64_t seed)
    : model_(model),
      eta_(std::move(initial)),
      rng_(seed),
      tree_(model.torus().num_bonds()),
      speed_(static_cast<double>(model.torus().side()) * model.torus().side() *
             model.thinning_factor()),
      stamp_(model.torus().num_bonds(), 0) {
  if (eta_.size() != model_.torus().num_sites()) {
    throw std::invalid_argument("initial configuration does not fit the torus");
  }
  for (int b = 0; b < tree_.size(); ++b) tree_.set(b, bond_rate(b));
  tree_.rebuild();
}

double KmcEngine::bond_rate(int b) const {
  const Bond& bond = model_.torus().bond(b);
  const int x = bond.x;
  const int y = model_.torus().tail(bond);
  if (eta_[x] == eta_[y]) return 0.0;
  return speed_ * model_.rate(eta_, b);
}

void KmcEngine::refresh_around(int x, int y) {
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0U);
    epoch_ = 1;
  }
  for (int site : {x, y}) {
    for (int b : model_.dependents(site)) {
      if (stamp_[b] == epoch_) continue;
      stamp_[b] = epoch_;
      tree_.set(b, bond_rate(b));
    }
  }
}

void KmcEngine::advance(double until) {
  const SitePotential* pert = model_.perturbation();
  const double n2 = static_cast<double>(model_.torus().side()) * model_.torus().side();
  while (true) {
    if (pending_ < 0.0) {
      const double total = tree_.total();
      if (!(total > 0.0)) {
        // Empty or full lattice: nothing can move.
        if (eta_.count() != 0 && eta_.count() != eta_.size()) {
          throw NumericalGuardError("KMC total rate underflow with mobile particles");
        }
        t_ = std::max(t_, until);
        return;
      }
      pending_ = t_ - std::log(rng_.uniform_open0()) / total;
    }
    if (pending_ > until) {
      t_ = until;
      return;
    }
    t_ = pending_;
    pending_ = -1.0;
    const int b = tree_.find(rng_.uniform() * tree_.total());
    if (b < 0) throw NumericalGuardError("KMC event selection found no active bond");
    ++proposals_;
    const Bond& bond = model_.torus().bond(b);
    const int x = bond.x;
    const int y = model_.torus().tail(bond);
    if (pert != nullptr) {
      const double accept = n2 * model_.rate_at(eta_, b, t_) / tree_.leaf(b);
      if (rng_.uniform() >= accept) continue;
    }
    eta_.swap_sites(x, y);
    ++events_;
    refresh_around(x, y);
    if (++since_rebuild_ >= 1U << 16) {
      tree_.rebuild();
      since_rebuild_ = 0;
    }
  }
}

double KmcEngine::table_discrepancy() const {
  double worst = 0.0;
  for (int b = 0; b < tree_.size(); ++b) {
    worst = std::max(worst, std::abs(tree_.leaf(b) - bond_rate(b)));
  }
  return worst;
}

double KmcEngine::total_drift() const {
  double fresh = 0.0;
  for (int b = 0; b < tree_.size(); ++b) fresh += bond_rate(b);
  if (fresh == 0.0) return std::abs(tree_.total());
  return std::abs(tree_.total() - fresh) / fresh;
}

Trajectory kmc_run(const RateModel& model, const Configuration& initial,
                   double T, std::span<const double> observation_times,
                   std::uint64_t seed) {
  if (!(T > 0.0)) throw std::invalid_argument("KMC horizon T must be positive");
  double prev = -1.0;
  for (double t : observation_times) {
    if (t < 0.0 || t > T || t <= prev) {
      throw std::invalid_argument(
          "observation times must be strictly increasing within [0, T]");
    }
    prev = t;
  }
  Trajectory out;
  out.seed = seed;
  KmcEngine engine(model, initial, seed);
  for (double t : observation_times) {
    engine.advance(t);
    out.times.push_back(t);
    out.samples.push_back(engine.state());
  }
  engine.advance(T);
  out.events = engine.events();
  out.proposals = engine.proposals();
  return out;
}

Configuration sample_product_configuration(
    const Torus& torus, const std::function<double(std::span<const double>)>& profile,
    Rng& rng) {
  Configuration eta(torus.num_sites());
  const int d = torus.dim();
  std::array<double, kMaxDim> r{};
  for (int x = 0; x < torus.num_sites(); ++x) {
    const Coords c = torus.coords(x);
    for (int i = 0; i < d; ++i) r[i] = (c[i] + 0.5) / torus.side();
    const double p = profile(std::span<const double>(r.data(), d));
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("initial profile leaves [0,1]");
    }
    eta.set(x, rng.bernoulli(p));
  }
  return eta;
}

std::vector<Trajectory> run_ensemble(
    const RateModel& model, const std::function<Configuration(Rng&)>& initial,
    double T, std::span<const double> observation_times, int trajectories,
    std::uint64_t master_seed, int threads) {
  if (trajectories <= 0) throw std::invalid_argument("trajectories must be > 0");
  std::vector<Trajectory> out(trajectories);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    while (!failed.load()) {
      const int k = next.fetch_add(1);
      if (k >= trajectories) return;
      try {
        const std::uint64_t seed = stream_seed(master_seed, static_cast<std::uint64_t>(k));
        Rng init_rng(seed);
        const Configuration eta0 = initial(init_rng);
        out[k] = kmc_run(model, eta0, T, observation_times, splitmix64(seed));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, trajectories);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_trajectory_csv(std::ostream& out, const Torus& torus,
                          const Trajectory& traj) {
  out << "t,site,occupancy\n";
  for (std::size_t s = 0; s < traj.samples.size(); ++s) {
    const std::string t = fmt_double(traj.times[s]);
    for (int x = 0; x < torus.num_sites(); ++x) {
      out << t << ',' << x << ',' << traj.samples[s].occ(x) << '\n';
    }
  }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_bytes(std::istream& in, int n) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), n);
  if (!in) throw std::runtime_error("truncated KWSK1 stream");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[5] = {'K', 'W', 'S', 'K', '1'};

}  // namespace

void write_trajectory_binary(std::ostream& out, const Torus& torus,
                             const Trajectory& traj) {
  out.write(kMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(torus.dim()));
  put_u32(out, static_cast<std::uint32_t>(torus.side()));
  put_u32(out, static_cast<std::uint32_t>(traj.samples.size()));
  for (std::size_t s = 0; s < traj.samples.size(); ++s) {
    put_u64(out, std::bit_cast<std::uint64_t>(traj.times[s]));
    for (std::uint64_t w : traj.samples[s].words()) put_u64(out, w);
  }
}

BinaryTrajectory read_trajectory_binary(std::istream& in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0) {
    throw std::runtime_error("not a KWSK1 trajectory stream");
  }
  BinaryTrajectory out;
  out.d = static_cast<int>(get_bytes(in, 4));
  out.N = static_cast<int>(get_bytes(in, 4));
  const auto m = get_bytes(in, 4);
  const Torus torus = make_torus(out.d, out.N);
  const int sites = torus.num_sites();
  const int words = (sites + 63) / 64;
  for (std::uint64_t s = 0; s < m; ++s) {
    out.times.push_back(std::bit_cast<double>(get_bytes(in, 8)));
    Configuration eta(sites);
    for (int w = 0; w < words; ++w) {
      const std::uint64_t bits = get_bytes(in, 8);
      for (int j = 0; j < 64 && w * 64 + j < sites; ++j) {
        if ((bits >> j) & 1U) eta.set(w * 64 + j, true);
      }
    }
    out.samples.push_back(std::move(eta));
  }
  return out;
}

}  // namespace kawasaki
