#pragma once

#include <span>
#include <string>
#include <vector>

#include "polyheat/banded.hpp"

namespace polyheat {

/// Symmetry class of a profile. Even profiles live on [0, L]; general
/// profiles on [-L, L].
enum class Symmetry { Even, None };

const char* to_string(Symmetry s);
Symmetry symmetry_from_string(const std::string& s);

/// Uniform grid on [0, L] (half) or [-L, L] (full).
class Grid {
 public:
  Grid() = default;
  /// Validated constructors used by the profile solver (n >= 501, L >= 10).
  static Grid half_line(double L, int n);
  static Grid full_line(double L, int n);
  /// Grid matching a symmetry class: even -> half line, none -> full line.
  static Grid for_symmetry(Symmetry s, double L, int n);
  /// Unvalidated constructor for internal uses such as kernel tables.
  static Grid make_unchecked(bool half, double L, int n);

  bool half() const { return half_; }
  double L() const { return L_; }
  int n() const { return n_; }
  double h() const { return h_; }
  double y(int i) const { return (half_ ? 0.0 : -L_) + i * h_; }
  std::vector<double> nodes() const;
  /// Index of the node at y = 0, or -1 when the full grid has an even node count.
  int origin_index() const;

  friend bool operator==(const Grid& a, const Grid& b) = default;

 private:
  Grid(bool half, double L, int n);
  bool half_ = true;
  double L_ = 0.0;
  int n_ = 0;
  double h_ = 0.0;
};

/// Finite-difference discretization of the rescaled linear operator
///   B f = (-1)^{m+1} Delta^m f + (y/2m) f'
/// on a truncated grid. Delta^m is built from m passes of the three-point
/// (radial, conservative) Laplacian. Ghost values mirror the grid across the
/// end nodes, which encodes f' = 0 at |y| = L and, on the half line, the
/// parity conditions at the origin. The rows at |y| = L are Dirichlet rows
/// and are overwritten by the callers.
class Discretization {
 public:
  Discretization(int m, int N, Grid grid);

  int m() const { return m_; }
  int N() const { return N_; }
  const Grid& grid() const { return grid_; }
  int n() const { return grid_.n(); }
  int bandwidth() const { return m_; }

  bool is_dirichlet(int i) const { return i == n() - 1 || (!grid_.half() && i == 0); }

  /// out = B f at every node, including the Dirichlet rows.
  template <class T>
  void apply(std::span<const T> f, std::span<T> out) const;

  /// Banded matrix of B, extracted by probing with 2m+1 colour vectors.
  BandedMatrix matrix() const;

  /// Trapezoidal weights for integrals over the line or R^N (radial).
  const std::vector<double>& weights() const { return weights_; }

  template <class T>
  T integrate(std::span<const T> g) const {
    T s = 0;
    for (int i = 0; i < n(); ++i) s += static_cast<T>(weights_[i]) * g[i];
    return s;
  }

 private:
  int m_;
  int N_;
  Grid grid_;
  std::vector<double> cplus_, cminus_;  // Laplacian coefficients on the extended index range
  std::vector<double> weights_;
};

}  // namespace polyheat
