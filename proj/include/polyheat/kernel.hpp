#pragma once

#include <vector>

#include "polyheat/model.hpp"

namespace polyheat {

/// Least-squares fit of the kernel envelope |F(y)| ~ D y^gamma exp(-d y^alpha).
/// gamma is the algebraic prefactor exponent from the WKB expansion and is
/// held fixed; D, d and alpha are fitted.
struct DecayFit {
  double D = 0.0;
  double d = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  int samples = 0;  // envelope samples used
  double y_lo = 0.0, y_hi = 0.0;
  double rms = 0.0;  // residual of the log-linear fit
};

/// Sampled rescaled kernel F and its derivatives on [0, L_F].
/// Immutable once built; safe to share between threads.
class KernelTable {
 public:
  const ModelParams& params() const { return params_; }
  int m() const { return params_.m(); }
  int N() const { return params_.N(); }
  double L() const { return L_; }
  int nodes() const { return static_cast<int>(y_.size()); }
  double h() const { return h_; }
  int kmax() const { return static_cast<int>(values_.size()) - 1; }
  double y(int i) const { return y_[i]; }
  const std::vector<double>& nodes_y() const { return y_; }
  /// Samples of F^(k) at the nodes.
  const std::vector<double>& column(int k) const;

  double mass() const { return mass_; }
  /// Largest estimated absolute quadrature error over all samples.
  double quadrature_error() const { return quad_error_; }
  /// Largest residual of the discretized kernel equation at interior nodes,
  /// NaN when the grid is too coarse or short to evaluate it.
  double ode_residual() const { return ode_residual_; }
  const DecayFit& decay() const { return decay_; }
  bool has_decay_fit() const { return decay_.samples > 0; }
  /// Exponent a of the weights; defaults to the fitted rate d.
  double weight_exponent() const { return weight_a_; }
  /// rho(y) = exp(a |y|^alpha) and rho*(y) = exp(-a |y|^alpha).
  double rho(double y) const;
  double rho_star(double y) const;

 private:
  friend KernelTable build_kernel_table(const ModelParams&, double, int, int);
  friend KernelTable make_kernel_table(const ModelParams&, std::vector<double>, std::vector<std::vector<double>>,
                                       double);
  explicit KernelTable(ModelParams p) : params_(p) {}
  void finalize();

  ModelParams params_;
  double L_ = 0.0;
  double h_ = 0.0;
  std::vector<double> y_;
  std::vector<std::vector<double>> values_;
  std::vector<long double> column0_;  // F in extended precision, for the ODE residual
  double mass_ = 0.0;
  double quad_error_ = 0.0;
  double ode_residual_ = 0.0;
  DecayFit decay_;
  double weight_a_ = 0.0;
};

/// Default table length: long enough for the mass, decay fit and Gram
/// matrices up to order 6 to be limited by quadrature, not truncation.
double default_kernel_length(int m, int N);

/// Compute F^(k)(y_i), k = 0..K_max, on n uniform nodes of [0, L_F] by
/// composite Gauss-Kronrod quadrature of the Fourier (N = 1) or Hankel
/// (radial N = 2..4) representation.
KernelTable build_kernel_table(const ModelParams& params, double L_F, int n, int K_max);

/// Rebuild a table from stored samples (used when reading a table file).
/// Derived quantities are recomputed; the quadrature error is carried over.
KernelTable make_kernel_table(const ModelParams& params, std::vector<double> y,
                              std::vector<std::vector<double>> columns, double quadrature_error = 0.0);

/// Direct quadrature of a single value F^(k)(y), independent of any table.
double kernel_quadrature(int m, int N, double y, int k);

/// Piecewise Hermite interpolation of F^(k) at |y| <= L_F, using the parity
/// F^(k)(-y) = (-1)^k F^(k)(y).
double kernel_eval(const KernelTable& table, double y, int k);

/// b(x, t) = t^{-N/2m} F(x t^{-1/2m}).
double fundamental_solution_eval(const KernelTable& table, double x, double t);

/// Fit the decay envelope over the outer half of the resolved part of the table.
DecayFit decay_fit(const KernelTable& table);

/// Algebraic prefactor exponent of the WKB tail of solutions to
/// B f + c f = 0 in N dimensions: (2m(c - 1/2) - (N-1) m) / (2m - 1).
double wkb_prefactor_exponent(int m, int N, double c);

}  // namespace polyheat
