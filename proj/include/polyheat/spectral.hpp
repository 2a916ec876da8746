#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "polyheat/error.hpp"
#include "polyheat/kernel.hpp"
#include "polyheat/model.hpp"

namespace polyheat {

/// Coefficients c[j] of sum_j c[j] y^j.
struct Polynomial {
  std::vector<double> coeffs;

  int degree() const;
  double leading() const { return coeffs.empty() ? 0.0 : coeffs.back(); }
  double operator()(double y) const;
};

/// Eigen-triple of the rescaled linear operator B and its adjoint.
struct SpectralPair {
  int l = 0;
  double lambda = 0.0;
  std::vector<double> psi;  // samples on the kernel table nodes
  Polynomial psi_star;
  std::uint64_t multiplicity = 1;
};

/// The integration domain of the table does not bound the truncation error.
class DomainTooSmallError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// psi*_l = (1/sqrt(l!)) [y^l + sum_{j>=1} (1/j!) (-Delta)^{mj} y^l] on the line,
/// with (-Delta)^{mj} = (-1)^{mj} d^{2mj}/dy^{2mj}.
Polynomial adjoint_polynomial(int m, int N, int l);

/// psi_l(y) = ((-1)^l / sqrt(l!)) F^(l)(y).
double eigenfunction_eval(const KernelTable& table, int l, double y);

SpectralPair spectral_pair(const KernelTable& table, int l);

/// G(l, k) = <psi_l, psi*_k> for l, k <= l_max. Integrals use the trapezoidal
/// rule on [-L_F, L_F]; the decay fit bounds the neglected tail and a
/// DomainTooSmallError is raised if that bound exceeds truncation_tol.
Eigen::MatrixXd gram_matrix(const KernelTable& table, int l_max, double truncation_tol = 1e-7);

/// Estimated tail contribution |<psi_l, psi*_k>| beyond L_F, from the decay fit.
double gram_truncation_bound(const KernelTable& table, int l, int k);

/// kappa_l(p) = <|psi_l|^p, psi*_l>. With the parity shortcut, odd l in one
/// dimension returns exactly 0; without it, the quadrature runs over the full
/// line.
double kappa(const KernelTable& table, int l, double p, bool parity_shortcut = true);

/// Coefficients of the non-standard pitchfork at p_1 = 3 for m = 2, N = 1.
struct PitchforkCoefficients {
  double mu = 0.0;      // int |psi_1|^3 psi*_2
  double nu = 0.0;      // int psi_1^2 sign(psi_1) psi_2 psi*_1
  double c_hat = 0.0;   // 1 / (24 mu nu)
  bool degenerate = false;
};
PitchforkCoefficients pitchfork_coefficients(const KernelTable& table, double zero_tol = 1e-8);

struct BifurcationCoefficients {
  int m = 2, N = 1, l = 0;
  Rational p_l;
  double kappa = 0.0;
  std::optional<double> c_hat;   // (N+l)^2 / (4 m^2 kappa)
  std::optional<PitchforkCoefficients> pitchfork;
  double gamma_slope = 0.0;      // (N+l) / ((p_l-1)(2m+l))
};
BifurcationCoefficients bifurcation_coefficients(const KernelTable& table, int l, double zero_tol = 1e-8);

/// One branch amplitude near p_l: f ~ eps psi_l + eps_corr psi_{corr_index}.
struct BranchAmplitude {
  double eps = 0.0;
  double eps_corr = 0.0;
  int corr_index = -1;
};

/// Signed amplitudes of the branches bifurcating from 0 at p_l.
///  kappa_l != 0: the single root of |eps|^{p-2} eps = c_hat (p - p_l).
///  kappa_l == 0, l = 1: both roots of |eps|^5 = c_hat_12 (p - p_l), with the
///  psi_2 correction 2 mu |eps|^3. Empty when c_hat_12 (p - p_l) < 0.
std::vector<BranchAmplitude> local_branch_amplitude(const BifurcationCoefficients& coeffs, double p);

enum class ScaleConvention { Bifurcation, Centre };

/// Scale factor of the scalar generating system:
///  Bifurcation: 4m^2 / (s (N+l)^2), which reproduces c_hat_l.
///  Centre:      -2m / (N+l).
double generating_scale(ScaleConvention conv, int m, int N, int l, double s);

struct GeneratingSolution {
  std::vector<double> eps;
  double residual = 0.0;
  bool trivial = false;
};

struct GeneratingOptions {
  int starts = 64;
  double range = 2.0;
  std::uint64_t seed = 20240611;
  int max_iterations = 200;
  double tol = 1e-12;
};

/// Solve eps_i = scale * <|sum_j eps_j psi_{l_j}|^p, psi*_{l_i}> by Newton from
/// random starts; returns the distinct fixed points (the trivial one included),
/// sorted lexicographically.
std::vector<GeneratingSolution> solve_generating_system(const KernelTable& table, const ModelParams& params,
                                                        const std::vector<int>& indices, double scale,
                                                        const GeneratingOptions& opts = {});

}  // namespace polyheat
