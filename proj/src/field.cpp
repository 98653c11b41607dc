#include "kawasaki/field.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kawasaki/io.hpp"

namespace kawasaki {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double phase(const FourierSeries::Term& t, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size() && i < 3; ++i) s += t.wavevector[i] * r[i];
  return kTwoPi * s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

FourierSeries& FourierSeries::add_cos(double amplitude, std::array<int, 3> k) {
  terms_.push_back({amplitude, false, k});
  return *this;
}

FourierSeries& FourierSeries::add_sin(double amplitude, std::array<int, 3> k) {
  terms_.push_back({amplitude, true, k});
  return *this;
}

bool FourierSeries::is_flat() const {
  for (const Term& t : terms_) {
    if (t.amplitude != 0.0 && t.wavevector != std::array<int, 3>{}) return false;
  }
  return true;
}

double FourierSeries::value(std::span<const double> r) const {
  double v = constant_;
  for (const Term& t : terms_) {
    const double ph = phase(t, r);
    v += t.amplitude * (t.is_sine ? std::sin(ph) : std::cos(ph));
  }
  return v;
}

Vec3 FourierSeries::gradient(std::span<const double> r) const {
  Vec3 g{};
  for (const Term& t : terms_) {
    const double ph = phase(t, r);
    const double dv = t.is_sine ? std::cos(ph) : -std::sin(ph);
    for (int i = 0; i < 3; ++i) g[i] += t.amplitude * kTwoPi * t.wavevector[i] * dv;
  }
  return g;
}

double FourierSeries::second(std::span<const double> r, int i, int j) const {
  double v = 0.0;
  for (const Term& t : terms_) {
    const double ph = phase(t, r);
    const double base = t.is_sine ? std::sin(ph) : std::cos(ph);
    v -= t.amplitude * kTwoPi * kTwoPi * t.wavevector[i] * t.wavevector[j] * base;
  }
  return v;
}

std::string FourierSeries::to_string() const {
  std::ostringstream os;
  os << fmt_double(constant_);
  for (const Term& t : terms_) {
    os << "; " << fmt_double(t.amplitude) << '*' << (t.is_sine ? "sin" : "cos")
       << '[' << t.wavevector[0];
    int last = 0;
    for (int i = 1; i < 3; ++i) {
      if (t.wavevector[i] != 0) last = i;
    }
    for (int i = 1; i <= last; ++i) os << ',' << t.wavevector[i];
    os << ']';
  }
  return os.str();
}

FourierSeries FourierSeries::parse(const std::string& text) {
  FourierSeries out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto star = item.find('*');
    if (star == std::string::npos) {
      std::size_t used = 0;
      const double c = std::stod(item, &used);
      if (used != item.size()) {
        throw std::invalid_argument("bad Fourier constant '" + item + "'");
      }
      out.constant_ += c;
      continue;
    }
    const std::string amp_text = trim(item.substr(0, star));
    const std::string rest = trim(item.substr(star + 1));
    std::size_t used = 0;
    const double amp = std::stod(amp_text, &used);
    if (used != amp_text.size()) {
      throw std::invalid_argument("bad Fourier amplitude '" + amp_text + "'");
    }
    const auto open = rest.find('[');
    const auto close = rest.find(']');
    if (open == std::string::npos || close == std::string::npos || close < open ||
        close + 1 != rest.size()) {
      throw std::invalid_argument("bad Fourier term '" + item + "'");
    }
    const std::string kind = trim(rest.substr(0, open));
    if (kind != "sin" && kind != "cos") {
      throw std::invalid_argument("Fourier term kind must be sin or cos: '" +
                                  item + "'");
    }
    std::array<int, 3> k{};
    std::stringstream ks(rest.substr(open + 1, close - open - 1));
    std::string comp;
    int idx = 0;
    while (std::getline(ks, comp, ',')) {
      if (idx >= 3) throw std::invalid_argument("wavevector has > 3 components");
      comp = trim(comp);
      std::size_t u = 0;
      k[idx++] = std::stoi(comp, &u);
      if (u != comp.size()) throw std::invalid_argument("bad wavevector '" + comp + "'");
    }
    if (idx == 0) throw std::invalid_argument("empty wavevector in '" + item + "'");
    if (kind == "sin") out.add_sin(amp, k); else out.add_cos(amp, k);
  }
  return out;
}

FieldSpec::FieldSpec(int d) : d_(d) {
  if (d < 1 || d > 3) throw std::invalid_argument("field dimension must be 1..3");
}

FieldSpec FieldSpec::constant(std::span<const double> e) {
  FieldSpec f(static_cast<int>(e.size()));
  f.set_constant(e);
  return f;
}

FieldSpec FieldSpec::conservative(int d, FourierSeries potential) {
  FieldSpec f(d);
  f.set_potential(std::move(potential));
  return f;
}

FieldSpec& FieldSpec::set_constant(std::span<const double> e) {
  if (static_cast<int>(e.size()) != d_) {
    throw std::invalid_argument("constant field has wrong dimension");
  }
  e0_ = {};
  for (int i = 0; i < d_; ++i) e0_[i] = e[i];
  return *this;
}

FieldSpec& FieldSpec::set_potential(FourierSeries potential) {
  for (const auto& t : potential.terms()) {
    for (int i = d_; i < 3; ++i) {
      if (t.wavevector[i] != 0) {
        throw std::invalid_argument("potential wavevector exceeds field dimension");
      }
    }
  }
  u_ = std::move(potential);
  return *this;
}

FieldSpec& FieldSpec::set_stream_function(FourierSeries psi) {
  if (d_ != 2 && !psi.is_flat()) {
    throw std::invalid_argument("stream functions are supported in d = 2 only");
  }
  psi_ = std::move(psi);
  return *this;
}

bool FieldSpec::is_conservative() const {
  return e0_ == Vec3{} && psi_.is_flat();
}

bool FieldSpec::is_constant() const { return u_.is_flat() && psi_.is_flat(); }

Vec3 FieldSpec::E_tilde(std::span<const double> r) const {
  Vec3 e = e0_;
  if (d_ == 2 && !psi_.is_flat()) {
    const Vec3 g = psi_.gradient(r);
    e[0] += g[1];
    e[1] -= g[0];
  }
  return e;
}

Vec3 FieldSpec::E(std::span<const double> r) const {
  Vec3 e = E_tilde(r);
  const Vec3 g = u_.gradient(r);
  for (int i = 0; i < d_; ++i) e[i] -= g[i];
  return e;
}

double FieldSpec::div_E_tilde(std::span<const double> r) const {
  if (d_ != 2 || psi_.is_flat()) return 0.0;
  return psi_.second(r, 0, 1) - psi_.second(r, 1, 0);
}

FieldSpec FieldSpec::adjoint() const {
  FieldSpec out = *this;
  for (double& v : out.e0_) v = -v;
  FourierSeries neg(-psi_.constant());
  for (const auto& t : psi_.terms()) {
    if (t.is_sine) neg.add_sin(-t.amplitude, t.wavevector);
    else neg.add_cos(-t.amplitude, t.wavevector);
  }
  out.psi_ = neg;
  return out;
}

double FieldSpec::work(std::span<const double> r, int axis, double length) const {
  double w = e0_[axis] * length;
  if (!u_.is_flat()) {
    std::array<double, 3> end{};
    for (int i = 0; i < d_; ++i) end[i] = r[i];
    end[axis] += length;
    w += u_.value(r) - u_.value(std::span<const double>(end.data(), d_));
  }
  if (d_ == 2 && !psi_.is_flat()) {
    static constexpr double kNodes[4] = {-0.8611363115940526, -0.3399810435848563,
                                         0.3399810435848563, 0.8611363115940526};
    static constexpr double kWeights[4] = {0.3478548451374538, 0.6521451548625461,
                                           0.6521451548625461, 0.3478548451374538};
    double acc = 0.0;
    std::array<double, 3> p{};
    for (int q = 0; q < 4; ++q) {
      for (int i = 0; i < d_; ++i) p[i] = r[i];
      p[axis] += length * 0.5 * (1.0 + kNodes[q]);
      const Vec3 g = psi_.gradient(std::span<const double>(p.data(), d_));
      const double component = axis == 0 ? g[1] : -g[0];
      acc += 0.5 * kWeights[q] * component;
    }
    w += acc * length;
  }
  return w;
}

FieldSpec::DecompositionCheck FieldSpec::check_decomposition(int n) const {
  DecompositionCheck out;
  if (is_constant() || is_conservative()) return out;
  int total = 1;
  for (int i = 0; i < d_; ++i) total *= n;
  std::array<double, 3> r{};
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int i = d_ - 1; i >= 0; --i) {
      r[i] = (rem % n + 0.5) / n;
      rem /= n;
    }
    const std::span<const double> rs(r.data(), d_);
    const Vec3 gu = u_.gradient(rs);
    const Vec3 et = E_tilde(rs);
    double dot = 0.0;
    for (int i = 0; i < d_; ++i) dot += gu[i] * et[i];
    out.max_orthogonality = std::max(out.max_orthogonality, std::abs(dot));
    out.max_divergence = std::max(out.max_divergence, std::abs(div_E_tilde(rs)));
  }
  return out;
}

void FieldSpec::validate() const {
  const DecompositionCheck c = check_decomposition();
  if (c.max_divergence > 1e-10) {
    throw std::invalid_argument("divergence-free part has |div| = " +
                                fmt_double(c.max_divergence));
  }
  if (c.max_orthogonality > 1e-10) {
    throw std::invalid_argument(
        "field is not orthogonally decomposed: max |grad U . Etilde| = " +
        fmt_double(c.max_orthogonality));
  }
}

}  // namespace kawasaki
