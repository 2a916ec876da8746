#include "polyheat/model.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "polyheat/error.hpp"

namespace polyheat {

Rational::Rational(std::int64_t n, std::int64_t d) {
  if (d == 0) throw DomainError("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n, d);
  num = n / g;
  den = d / g;
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational bifurcation_exponent(int m, int N, int l) {
  if (m < 1 || N < 1) throw DomainError("bifurcation_exponent requires m >= 1 and N >= 1");
  if (l < 0) throw DomainError("bifurcation_exponent requires l >= 0");
  return Rational(N + l + 2 * m, N + l);
}

std::uint64_t multiplicity(int N, int l) {
  if (N < 1 || l < 0) throw DomainError("multiplicity requires N >= 1 and l >= 0");
  // binomial(N+l-1, l) built incrementally; every partial product is an integer.
  std::uint64_t r = 1;
  for (int k = 1; k <= l; ++k) r = r * static_cast<std::uint64_t>(N - 1 + k) / static_cast<std::uint64_t>(k);
  return r;
}

ModelParams::ModelParams(int m, int N, double p) : m_(m), N_(N), p_(p) {
  if (m < 1) throw DomainError("diffusion order m must be >= 1");
  if (N < 1) throw DomainError("dimension N must be >= 1");
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("exponent p must be finite and > 1");
  if (auto ps = sobolev(); ps && !(p < *ps)) {
    throw DomainError("p = " + std::to_string(p) + " is not below the Sobolev exponent " + std::to_string(*ps));
  }
}

ModelParams ModelParams::linear(int m, int N) {
  if (m < 1 || N < 1) throw DomainError("linear model requires m >= 1 and N >= 1");
  return ModelParams(m, N, 1.0 + 2.0 * m / N);
}

double ModelParams::c1() const { return 1.0 / (p_ - 1.0) - static_cast<double>(N_) / (2.0 * m_); }

double ModelParams::fujita() const { return 1.0 + 2.0 * m_ / N_; }

std::optional<double> ModelParams::sobolev() const {
  if (N_ <= 2 * m_) return std::nullopt;
  return static_cast<double>(N_ + 2 * m_) / static_cast<double>(N_ - 2 * m_);
}

double ModelParams::lambda(int l) const { return -static_cast<double>(l) / (2.0 * m_); }

double ModelParams::alpha() const { return 2.0 * m_ / (2.0 * m_ - 1.0); }

double sphere_area(int N) {
  if (N < 1) throw DomainError("sphere_area requires N >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N);
}

}  // namespace polyheat
