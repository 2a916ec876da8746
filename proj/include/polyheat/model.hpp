#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace polyheat {

/// Reduced fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;
  friend bool operator==(const Rational& a, const Rational& b) = default;
};

/// Critical exponent p_l = 1 + 2m/(N+l), returned exactly.
Rational bifurcation_exponent(int m, int N, int l);

/// Dimension of the eigenspace of order l in N dimensions: binomial(N+l-1, l).
std::uint64_t multiplicity(int N, int l);

/// The equation instance u_t = -(-Delta)^m u + |u|^p.
///
/// Derived quantities are computed on demand so they can never drift out of
/// sync with (m, N, p).
class ModelParams {
 public:
  ModelParams(int m, int N, double p);

  /// Instance for purely linear work (kernel tables); p is set to the Fujita
  /// exponent so that the object satisfies every invariant.
  static ModelParams linear(int m, int N);

  int m() const { return m_; }
  int N() const { return N_; }
  double p() const { return p_; }

  ModelParams with_p(double p) const { return ModelParams(m_, N_, p); }

  /// c_1 = 1/(p-1) - N/(2m).
  double c1() const;
  /// Fujita exponent p_0 = 1 + 2m/N.
  double fujita() const;
  /// Sobolev exponent (N+2m)/(N-2m), only defined for N > 2m.
  std::optional<double> sobolev() const;
  /// Eigenvalue -l/(2m) of the rescaled linear operator.
  double lambda(int l) const;
  /// Kernel decay exponent 2m/(2m-1).
  double alpha() const;
  Rational p_l(int l) const { return bifurcation_exponent(m_, N_, l); }

 private:
  int m_;
  int N_;
  double p_;
};

/// Surface area of the unit sphere in R^N (2 for N = 1).
double sphere_area(int N);

}  // namespace polyheat
