#include "polyheat/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "polyheat/error.hpp"
#include "polyheat/model.hpp"

namespace polyheat {

const char* to_string(Symmetry s) { return s == Symmetry::Even ? "even" : "none"; }

Symmetry symmetry_from_string(const std::string& s) {
  if (s == "even") return Symmetry::Even;
  if (s == "none") return Symmetry::None;
  throw DomainError("unknown symmetry class '" + s + "' (expected even or none)");
}

Grid::Grid(bool half, double L, int n) : half_(half), L_(L), n_(n), h_((half ? L : 2.0 * L) / (n - 1)) {}

Grid Grid::make_unchecked(bool half, double L, int n) {
  if (n < 3 || !(L > 0.0)) throw DomainError("grid needs n >= 3 and L > 0");
  return Grid(half, L, n);
}

Grid Grid::half_line(double L, int n) {
  if (n < 501) throw DomainError("grid needs at least 501 nodes");
  if (!(L >= 10.0)) throw DomainError("grid half-length L must be >= 10");
  return Grid(true, L, n);
}

Grid Grid::full_line(double L, int n) {
  if (n < 501) throw DomainError("grid needs at least 501 nodes");
  if (!(L >= 10.0)) throw DomainError("grid half-length L must be >= 10");
  return Grid(false, L, n);
}

Grid Grid::for_symmetry(Symmetry s, double L, int n) {
  return s == Symmetry::Even ? half_line(L, n) : full_line(L, n);
}

std::vector<double> Grid::nodes() const {
  std::vector<double> y(n_);
  for (int i = 0; i < n_; ++i) y[i] = this->y(i);
  return y;
}

int Grid::origin_index() const {
  if (half_) return 0;
  return n_ % 2 == 1 ? (n_ - 1) / 2 : -1;
}

Discretization::Discretization(int m, int N, Grid grid) : m_(m), N_(N), grid_(grid) {
  if (m < 1 || N < 1) throw DomainError("discretization needs m >= 1 and N >= 1");
  if (N > 1 && !grid.half()) throw UnsupportedError("radial problems (N > 1) are posed on the half line only");
  const int n = grid.n();
  const double h = grid.h();
  const int ext = n + 2 * m;
  cplus_.assign(ext, 0.0);
  cminus_.assign(ext, 0.0);
  for (int e = 0; e < ext; ++e) {
    const int i = e - m;
    if (N == 1) {
      cplus_[e] = cminus_[e] = 1.0 / (h * h);
    } else if (i == 0) {
      cplus_[e] = 2.0 * N / (h * h);
      cminus_[e] = 0.0;
    } else {
      // Finite-volume form with exact cell volumes; this keeps the scheme
      // second order uniformly up to the origin. Negative radii only occur in
      // mirrored ghost slots, so |r| is used.
      const double r = std::abs(i * h);
      const double rp = r + 0.5 * h, rm = r - 0.5 * h;
      const double vol = (std::pow(rp, N) - std::pow(rm, N)) / (N * h);
      cplus_[e] = std::pow(rp, N - 1) / (h * h * vol);
      cminus_[e] = std::pow(rm, N - 1) / (h * h * vol);
    }
  }

  weights_.assign(n, h);
  if (grid.half()) {
    weights_[0] = 0.5 * h;
    weights_[n - 1] = 0.5 * h;
    if (N == 1) {
      for (auto& w : weights_) w *= 2.0;
    } else {
      // Cell volumes of the finite-volume Laplacian, so that discrete fluxes
      // telescope under the quadrature.
      const double area = sphere_area(N);
      for (int i = 0; i < n; ++i) {
        const double r = grid.y(i);
        const double a = std::max(0.0, r - 0.5 * h);
        const double b = (i == n - 1) ? r : r + 0.5 * h;
        weights_[i] = area * (std::pow(b, N) - std::pow(a, N)) / N;
      }
    }
  } else {
    weights_[0] = 0.5 * h;
    weights_[n - 1] = 0.5 * h;
  }
}

template <class T>
void Discretization::apply(std::span<const T> f, std::span<T> out) const {
  const int n = grid_.n();
  const int g = m_;
  const int ext = n + 2 * g;
  if (static_cast<int>(f.size()) != n || static_cast<int>(out.size()) != n) {
    throw DomainError("discretization: vector size does not match grid");
  }
  std::vector<T> fe(ext), a(ext), b(ext, T(0));
  for (int i = 0; i < n; ++i) fe[i + g] = f[i];
  for (int k = 1; k <= g; ++k) {
    fe[g - k] = f[k];
    fe[g + n - 1 + k] = f[n - 1 - k];
  }
  a = fe;
  int lo = 0, hi = ext - 1;
  for (int pass = 0; pass < m_; ++pass) {
    const int start = grid_.half() ? g : lo + 1;
    for (int e = start; e <= hi - 1; ++e) {
      b[e] = static_cast<T>(cplus_[e]) * (a[e + 1] - a[e]) - static_cast<T>(cminus_[e]) * (a[e] - a[e - 1]);
    }
    if (grid_.half()) {
      for (int k = 1; k <= g; ++k) b[g - k] = b[g + k];
    } else {
      ++lo;
    }
    --hi;
    std::swap(a, b);
  }
  const T sign = (m_ % 2 == 1) ? T(1) : T(-1);
  const T drift = T(1) / (T(2) * T(2 * m_) * static_cast<T>(grid_.h()));
  for (int i = 0; i < n; ++i) {
    const int e = i + g;
    out[i] = sign * a[e] + static_cast<T>(grid_.y(i)) * (fe[e + 1] - fe[e - 1]) * drift;
  }
}

template void Discretization::apply<double>(std::span<const double>, std::span<double>) const;
template void Discretization::apply<long double>(std::span<const long double>, std::span<long double>) const;

BandedMatrix Discretization::matrix() const {
  const int n = grid_.n();
  const int colours = 2 * m_ + 1;
  BandedMatrix A(n, m_, m_);
  std::vector<double> v(n), out(n);
  for (int c = 0; c < colours; ++c) {
    for (int j = 0; j < n; ++j) v[j] = (j % colours == c) ? 1.0 : 0.0;
    apply<double>(v, out);
    for (int i = 0; i < n; ++i) {
      for (int j = std::max(0, i - m_); j <= std::min(n - 1, i + m_); ++j) {
        if (j % colours == c) A(i, j) = out[i];
      }
    }
  }
  return A;
}

}  // namespace polyheat
