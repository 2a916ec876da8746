#include "polyheat/banded.hpp"

#include <lapacke.h>

#include <algorithm>

#include "polyheat/error.hpp"

namespace polyheat {

BandedMatrix::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(static_cast<std::size_t>(ld_) * n, 0.0) {
  if (n < 1 || kl < 0 || ku < 0) throw DomainError("invalid banded matrix shape");
}

void BandedMatrix::multiply(std::span<const double> x, std::span<double> y) const { multiply_t<double>(x, y); }

void BandedMatrix::set_identity_row(int i, double diag) {
  const int j0 = std::max(0, i - kl_);
  const int j1 = std::min(n_ - 1, i + ku_);
  for (int j = j0; j <= j1; ++j) (*this)(i, j) = 0.0;
  (*this)(i, i) = diag;
}

void BandedMatrix::add_to_diagonal(double v) {
  for (int i = 0; i < n_; ++i) (*this)(i, i) += v;
}

BandedLU::BandedLU(BandedMatrix a) : a_(std::move(a)), ipiv_(static_cast<std::size_t>(a_.size())) {
  info_ = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, a_.n_, a_.n_, a_.kl_, a_.ku_, a_.ab_.data(), a_.ld_, ipiv_.data());
  if (info_ < 0) throw Error("dgbtrf rejected its arguments");
}

void BandedLU::solve(std::span<double> b) const {
  if (static_cast<int>(b.size()) != a_.n_) throw DomainError("banded solve: size mismatch");
  if (singular()) throw ConvergenceError("banded solve: matrix is exactly singular", 0.0);
  const int info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', a_.n_, a_.kl_, a_.ku_, 1, a_.ab_.data(), a_.ld_,
                                  ipiv_.data(), b.data(), a_.n_);
  if (info != 0) throw Error("dgbtrs failed");
}

}  // namespace polyheat
