#pragma once

#include <span>
#include <vector>

namespace polyheat {

/// Square banded matrix in LAPACK band storage with room for LU fill-in.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }
  bool in_band(int i, int j) const { return j - i <= ku_ && i - j <= kl_ && i >= 0 && j >= 0 && i < n_ && j < n_; }

  double& operator()(int i, int j) { return ab_[index(i, j)]; }
  double operator()(int i, int j) const { return ab_[index(i, j)]; }

  /// y = A x.
  void multiply(std::span<const double> x, std::span<double> y) const;
  template <class T>
  void multiply_t(std::span<const T> x, std::span<T> y) const {
    for (int i = 0; i < n_; ++i) {
      T s = 0;
      const int j0 = i - kl_ < 0 ? 0 : i - kl_;
      const int j1 = i + ku_ >= n_ ? n_ - 1 : i + ku_;
      for (int j = j0; j <= j1; ++j) s += static_cast<T>((*this)(i, j)) * x[j];
      y[i] = s;
    }
  }

  /// Replace row i by the unit row e_i.
  void set_identity_row(int i, double diag = 1.0);
  void add_to_diagonal(double v);

  const std::vector<double>& storage() const { return ab_; }

 private:
  friend class BandedLU;
  int index(int i, int j) const { return (kl_ + ku_ + i - j) + j * ld_; }
  int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 0;
  std::vector<double> ab_;
};

/// LU factorization with partial pivoting (LAPACK dgbtrf/dgbtrs).
class BandedLU {
 public:
  explicit BandedLU(BandedMatrix a);
  bool singular() const { return info_ > 0; }
  int size() const { return a_.size(); }
  /// Overwrites b with A^{-1} b.
  void solve(std::span<double> b) const;

 private:
  BandedMatrix a_;
  std::vector<int> ipiv_;
  int info_ = 0;
};

}  // namespace polyheat
