#pragma once

// Driving fields on the unit torus T^d in orthogonal-decomposition form
//   E = E0 - grad U + curl psi,
// with E0 a constant vector, U a Fourier series (conservative part) and, in
// d = 2, a stream function psi giving the divergence-free part
// (d_2 psi, -d_1 psi).

#include <array>
#include <span>
#include <string>
#include <vector>

namespace kawasaki {

using Vec3 = std::array<double, 3>;

/// Finite real Fourier series c + sum_j a_j {cos|sin}(2 pi k_j . r).
class FourierSeries {
 public:
  struct Term {
    double amplitude = 0.0;
    bool is_sine = false;
    std::array<int, 3> wavevector{};
  };

  FourierSeries() = default;
  explicit FourierSeries(double constant) : constant_(constant) {}

  FourierSeries& add_cos(double amplitude, std::array<int, 3> k);
  FourierSeries& add_sin(double amplitude, std::array<int, 3> k);

  double constant() const { return constant_; }
  void set_constant(double c) { constant_ = c; }
  const std::vector<Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty() && constant_ == 0.0; }
  /// True when every term vanishes (constant part ignored).
  bool is_flat() const;

  double value(std::span<const double> r) const;
  Vec3 gradient(std::span<const double> r) const;
  /// Mixed second derivative d_i d_j.
  double second(std::span<const double> r, int i, int j) const;

  /// Text form "c; a*cos[k1,k2]; b*sin[k1]" accepted by parse().
  std::string to_string() const;
  static FourierSeries parse(const std::string& text);

 private:
  double constant_ = 0.0;
  std::vector<Term> terms_;
};

/// Orthogonally decomposed driving field E = -grad U + Etilde.
class FieldSpec {
 public:
  FieldSpec() = default;
  explicit FieldSpec(int d);

  static FieldSpec zero(int d) { return FieldSpec(d); }
  static FieldSpec constant(std::span<const double> e);
  static FieldSpec conservative(int d, FourierSeries potential);

  FieldSpec& set_constant(std::span<const double> e);
  FieldSpec& set_potential(FourierSeries potential);
  FieldSpec& set_stream_function(FourierSeries psi);

  int dim() const { return d_; }
  const Vec3& constant_part() const { return e0_; }
  const FourierSeries& potential() const { return u_; }
  const FourierSeries& stream_function() const { return psi_; }

  /// E = -grad U (no divergence-free part).
  bool is_conservative() const;
  /// Constant vector field (U and psi flat).
  bool is_constant() const;

  double U(std::span<const double> r) const { return u_.value(r); }
  Vec3 grad_U(std::span<const double> r) const { return u_.gradient(r); }
  Vec3 E_tilde(std::span<const double> r) const;
  Vec3 E(std::span<const double> r) const;
  double div_E_tilde(std::span<const double> r) const;

  /// Field of the time-reversed (adjoint) dynamics: -grad U - Etilde.
  FieldSpec adjoint() const;

  /// Work of E along the segment r -> r + length * e_axis: closed form for
  /// the constant and conservative parts, 4-point Gauss-Legendre for curl psi.
  double work(std::span<const double> r, int axis, double length) const;

  /// Largest |div Etilde| and |grad U . Etilde| on a uniform n^d grid.
  struct DecompositionCheck {
    double max_divergence = 0.0;
    double max_orthogonality = 0.0;
  };
  DecompositionCheck check_decomposition(int n = 32) const;

  /// Throws std::invalid_argument unless both residuals are <= 1e-10.
  void validate() const;

 private:
  int d_ = 1;
  Vec3 e0_{};
  FourierSeries u_;
  FourierSeries psi_;
};

}  // namespace kawasaki
