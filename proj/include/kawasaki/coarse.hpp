#pragma once

// Grid functions on the unit torus and the microscopic -> macroscopic maps:
// empirical density, block averages, mollification, ensemble statistics.
//
// Lattice site x of T_N^d is identified with the grid cell of side 1/N
// centred at (x + 1/2)/N, so the empirical density of a configuration is a
// DensityField on the M = N grid and coarsening to M | N is a block mean.

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <vector>

#include "kawasaki/kmc.hpp"
#include "kawasaki/lattice.hpp"

namespace kawasaki {

/// Uniform M^d cell grid on T^d, row-major with the last index fastest.
struct Grid {
  int d = 1;
  int M = 1;

  int cells() const;
  double dx() const { return 1.0 / M; }
  double cell_volume() const;
  Coords coords(int cell) const;
  int cell(const Coords& c) const;  // periodic
  int neighbor(int cell, int axis, int step) const;
  /// Cell centre (i + 1/2)/M per axis.
  std::array<double, 3> center(int cell) const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

Grid make_grid(int d, int M);

/// Grid function with values in [0,1].
class DensityField {
 public:
  DensityField() = default;
  /// Throws std::invalid_argument if a value leaves [0,1] by more than tol.
  DensityField(Grid grid, Eigen::VectorXd values, double tol = 1e-12);

  static DensityField constant(Grid grid, double rho);
  template <class F>
  static DensityField from_function(Grid grid, F&& profile) {
    Eigen::VectorXd v(grid.cells());
    for (int c = 0; c < grid.cells(); ++c) {
      const auto r = grid.center(c);
      v[c] = profile(std::span<const double>(r.data(), grid.d));
    }
    return DensityField(grid, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int c) const { return values_[c]; }
  /// Arithmetic mean of the cell values.
  double mass() const { return mass_; }

 private:
  Grid grid_;
  Eigen::VectorXd values_;
  double mass_ = 0.0;
};

/// Time-indexed sequence of grid functions.
struct Path {
  Grid grid;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> slices;

  int size() const { return static_cast<int>(slices.size()); }
  double horizon() const { return times.back() - times.front(); }
  DensityField at(int k) const { return DensityField(grid, slices[k]); }
};

/// Time reversal theta: slice k of the result is slice m-k of the input and
/// times are mapped t -> t_0 + t_m - t.
Path time_reversed(const Path& path);

/// Eta as a piecewise-constant field on the M = N grid.
DensityField empirical_density(const Torus& torus, const Configuration& config);

/// Mean occupancy over the periodic sup-norm box of radius l around x
/// (each site counted once when the box wraps around the torus).
double block_average(const Torus& torus, const Configuration& config, int x, int l);

/// Mass-conservative block mean onto the coarser grid; requires M | N.
DensityField coarsen(const DensityField& field, int M);
Eigen::VectorXd coarsen(const Grid& fine, const Eigen::VectorXd& values, int M);

/// One-dimensional plateau mollifier profile on [-1,1] (unscaled): equals
/// 1/2 on |s| <= 1-kappa and falls to 0 at |s| = 1 through a C^2 edge.
double plateau_profile(double s, double kappa);

/// Periodic convolution with the product plateau mollifier of radius eps,
/// discretized on the grid and normalized to unit mass. Rejects kernels
/// whose edge spans fewer than two cells (kappa*eps < 2 dx).
DensityField mollify(const DensityField& field, double kappa, double eps);

struct EnsembleStatistics {
  DensityField mean;
  Eigen::VectorXd standard_error;  // zero for a single trajectory
  int trajectories = 0;
};

/// Cellwise mean of coarsened empirical densities at observation index k.
EnsembleStatistics ensemble_mean(const Torus& torus,
                                 std::span<const Trajectory> trajectories,
                                 int sample, int M);
/// Same at observation time t (must be an observation time of every member).
EnsembleStatistics ensemble_mean_at(const Torus& torus,
                                    std::span<const Trajectory> trajectories,
                                    double t, int M);

/// Periodic multilinear interpolation of cell-centred values at r.
double interpolate_periodic(const Grid& grid, const Eigen::VectorXd& values,
                            std::span<const double> r);

/// L1(T^d) distance sum |a - b| dx^d.
double l1_distance(const Grid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double l2_distance(const Grid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// CSV: cell indices then value (header i[,j[,k]],value).
void write_density_csv(std::ostream& out, const Grid& grid, const Eigen::VectorXd& values);
/// CSV with a leading t column.
void write_path_csv(std::ostream& out, const Path& path);

}  // namespace kawasaki
