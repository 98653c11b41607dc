#include "kawasaki/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kawasaki/io.hpp"

namespace kawasaki {

int Grid::cells() const {
  int n = 1;
  for (int i = 0; i < d; ++i) n *= M;
  return n;
}

double Grid::cell_volume() const { return std::pow(dx(), d); }

Coords Grid::coords(int cell) const {
  Coords c{};
  for (int i = d - 1; i >= 0; --i) {
    c[i] = cell % M;
    cell /= M;
  }
  return c;
}

int Grid::cell(const Coords& c) const {
  int idx = 0;
  for (int i = 0; i < d; ++i) idx = idx * M + ((c[i] % M) + M) % M;
  return idx;
}

int Grid::neighbor(int cell_index, int axis, int step) const {
  Coords c = coords(cell_index);
  c[axis] += step;
  return cell(c);
}

std::array<double, 3> Grid::center(int cell_index) const {
  const Coords c = coords(cell_index);
  std::array<double, 3> r{};
  for (int i = 0; i < d; ++i) r[i] = (c[i] + 0.5) / M;
  return r;
}

Grid make_grid(int d, int M) {
  if (d < 1 || d > 3) throw std::invalid_argument("grid dimension must be 1..3");
  if (M < 1) throw std::invalid_argument("grid size must be >= 1");
  return Grid{d, M};
}

DensityField::DensityField(Grid grid, Eigen::VectorXd values, double tol)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cells()) {
    throw std::invalid_argument("density field size does not match the grid");
  }
  for (Eigen::Index c = 0; c < values_.size(); ++c) {
    const double v = values_[c];
    if (!(v >= -tol && v <= 1.0 + tol)) {
      throw std::invalid_argument("density value " + fmt_double(v) + " at cell " +
                                  std::to_string(c) + " outside [0,1]");
    }
  }
  mass_ = values_.size() > 0 ? values_.mean() : 0.0;
}

DensityField DensityField::constant(Grid grid, double rho) {
  return DensityField(grid, Eigen::VectorXd::Constant(grid.cells(), rho));
}

Path time_reversed(const Path& path) {
  Path out;
  out.grid = path.grid;
  const int m = path.size();
  const double t0 = path.times.front();
  const double t1 = path.times.back();
  for (int k = m - 1; k >= 0; --k) {
    out.times.push_back(t0 + t1 - path.times[k]);
    out.slices.push_back(path.slices[k]);
  }
  return out;
}

DensityField empirical_density(const Torus& torus, const Configuration& config) {
  const Grid grid{torus.dim(), torus.side()};
  Eigen::VectorXd v(torus.num_sites());
  for (int x = 0; x < torus.num_sites(); ++x) v[x] = config.occ(x);
  return DensityField(grid, std::move(v));
}

double block_average(const Torus& torus, const Configuration& config, int x, int l) {
  if (l < 0) throw std::invalid_argument("block radius must be >= 0");
  const int n = torus.side();
  const int d = torus.dim();
  const int span = std::min(2 * l + 1, n);
  const int start = span == n ? 0 : -l;
  const Coords base = torus.coords(x);
  int total = 1;
  for (int i = 0; i < d; ++i) total *= span;
  long occupied = 0;
  for (int k = 0; k < total; ++k) {
    Coords c = base;
    int rem = k;
    for (int i = d - 1; i >= 0; --i) {
      const int off = start + rem % span;
      c[i] = span == n ? off : base[i] + off;
      rem /= span;
    }
    occupied += config.occ(torus.site(c));
  }
  return static_cast<double>(occupied) / total;
}

Eigen::VectorXd coarsen(const Grid& fine, const Eigen::VectorXd& values, int M) {
  if (M <= 0 || fine.M % M != 0) {
    throw std::invalid_argument("coarse grid " + std::to_string(M) +
                                " must divide fine grid " + std::to_string(fine.M));
  }
  const Grid coarse{fine.d, M};
  const int ratio = fine.M / M;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(coarse.cells());
  for (int c = 0; c < fine.cells(); ++c) {
    Coords fc = fine.coords(c);
    for (int i = 0; i < fine.d; ++i) fc[i] /= ratio;
    out[coarse.cell(fc)] += values[c];
  }
  out /= std::pow(static_cast<double>(ratio), fine.d);
  return out;
}

DensityField coarsen(const DensityField& field, int M) {
  return DensityField(Grid{field.grid().d, M}, coarsen(field.grid(), field.values(), M));
}

double plateau_profile(double s, double kappa) {
  const double a = std::abs(s);
  if (a >= 1.0) return 0.0;
  if (a <= 1.0 - kappa) return 0.5;
  const double u = (a - (1.0 - kappa)) / kappa;
  const double smooth = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
  const double bump = 70.0 * std::pow(u * (1.0 - u), 3);
  // The bump restores the mass lost by the smoothstep so the continuous
  // kernel has unit integral with plateau exactly 1/2.
  return 0.5 * (1.0 - smooth + bump);
}

DensityField mollify(const DensityField& field, double kappa, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 1/2)");
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0, 1)");
  const Grid& g = field.grid();
  const double dx = g.dx();
  if (kappa * eps < 2.0 * dx) {
    throw std::invalid_argument("grid too coarse for the mollifier edge: kappa*eps = " +
                                fmt_double(kappa * eps) + " < 2 dx = " +
                                fmt_double(2.0 * dx));
  }
  const int reach = static_cast<int>(std::floor(eps / dx));
  std::vector<double> w1;
  for (int j = -reach; j <= reach; ++j) w1.push_back(plateau_profile(j * dx / eps, kappa));
  double sum1 = 0.0;
  for (double w : w1) sum1 += w;
  for (double& w : w1) w /= sum1;

  // Separable product kernel: convolve one axis at a time.
  Eigen::VectorXd cur = field.values();
  for (int axis = 0; axis < g.d; ++axis) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(cur.size());
    for (int c = 0; c < g.cells(); ++c) {
      double acc = 0.0;
      for (int j = -reach; j <= reach; ++j) acc += w1[j + reach] * cur[g.neighbor(c, axis, j)];
      next[c] = acc;
    }
    cur = std::move(next);
  }
  // Convex combinations stay in [min, max]; rounding is clamped to that hull.
  const double lo = field.values().minCoeff();
  const double hi = field.values().maxCoeff();
  cur = cur.cwiseMax(lo).cwiseMin(hi);
  return DensityField(g, std::move(cur));
}

EnsembleStatistics ensemble_mean(const Torus& torus,
                                 std::span<const Trajectory> trajectories,
                                 int sample, int M) {
  if (trajectories.empty()) throw std::invalid_argument("empty ensemble");
  const Grid fine{torus.dim(), torus.side()};
  const Grid coarse{torus.dim(), M};
  const int n = static_cast<int>(trajectories.size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(coarse.cells());
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(coarse.cells());
  const double t_ref = trajectories[0].times.at(sample);
  for (const Trajectory& tr : trajectories) {
    if (sample < 0 || sample >= static_cast<int>(tr.samples.size()) ||
        tr.times[sample] != t_ref || tr.samples[sample].size() != torus.num_sites()) {
      throw std::invalid_argument("mismatched ensemble member");
    }
    const Eigen::VectorXd c = coarsen(fine, empirical_density(torus, tr.samples[sample]).values(), M);
    sum += c;
    sum2 += c.cwiseProduct(c);
  }
  EnsembleStatistics out;
  out.trajectories = n;
  Eigen::VectorXd mean = sum / n;
  out.standard_error = Eigen::VectorXd::Zero(coarse.cells());
  if (n > 1) {
    const Eigen::VectorXd var =
        ((sum2 - n * mean.cwiseProduct(mean)) / (n - 1)).cwiseMax(0.0);
    out.standard_error = (var / n).cwiseSqrt();
  }
  out.mean = DensityField(coarse, std::move(mean));
  return out;
}

EnsembleStatistics ensemble_mean_at(const Torus& torus,
                                    std::span<const Trajectory> trajectories,
                                    double t, int M) {
  if (trajectories.empty()) throw std::invalid_argument("empty ensemble");
  const auto& times = trajectories[0].times;
  const auto it = std::find(times.begin(), times.end(), t);
  if (it == times.end()) throw std::invalid_argument("time is not an observation time");
  return ensemble_mean(torus, trajectories, static_cast<int>(it - times.begin()), M);
}

double interpolate_periodic(const Grid& grid, const Eigen::VectorXd& values,
                            std::span<const double> r) {
  Coords base{};
  std::array<double, 3> frac{};
  for (int i = 0; i < grid.d; ++i) {
    const double u = r[i] * grid.M - 0.5;
    const double fl = std::floor(u);
    base[i] = static_cast<int>(fl);
    frac[i] = u - fl;
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << grid.d); ++corner) {
    Coords c = base;
    double w = 1.0;
    for (int i = 0; i < grid.d; ++i) {
      const bool up = (corner >> i) & 1;
      c[i] += up ? 1 : 0;
      w *= up ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) acc += w * values[grid.cell(c)];
  }
  return acc;
}

double l1_distance(const Grid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().sum() * grid.cell_volume();
}

double l2_distance(const Grid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt((a - b).squaredNorm() * grid.cell_volume());
}

namespace {

void index_header(std::ostream& out, int d) {
  static const char* names[3] = {"i", "j", "k"};
  for (int i = 0; i < d; ++i) out << names[i] << ',';
}

}  // namespace

void write_density_csv(std::ostream& out, const Grid& grid, const Eigen::VectorXd& values) {
  index_header(out, grid.d);
  out << "value\n";
  for (int c = 0; c < grid.cells(); ++c) {
    const Coords cc = grid.coords(c);
    for (int i = 0; i < grid.d; ++i) out << cc[i] << ',';
    out << fmt_double(values[c]) << '\n';
  }
}

void write_path_csv(std::ostream& out, const Path& path) {
  out << "t,";
  index_header(out, path.grid.d);
  out << "value\n";
  for (int k = 0; k < path.size(); ++k) {
    const std::string t = fmt_double(path.times[k]);
    for (int c = 0; c < path.grid.cells(); ++c) {
      const Coords cc = path.grid.coords(c);
      out << t << ',';
      for (int i = 0; i < path.grid.d; ++i) out << cc[i] << ',';
      out << fmt_double(path.slices[k][c]) << '\n';
    }
  }
}

}  // namespace kawasaki
