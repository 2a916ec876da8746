#pragma once

#include <span>
#include <string>
#include <vector>

#include "polyheat/banded.hpp"
#include "polyheat/grid.hpp"
#include "polyheat/kernel.hpp"
#include "polyheat/model.hpp"

namespace polyheat {

/// Exponential-bundle fit of a profile tail,
///   f ~ y^gamma exp(-rate y^alpha) [C1 cos(w y^{4/3}) + C2 sin(w y^{4/3})],
/// plus a probe for a slowly decaying algebraic component C0 y^{-2m/(p-1)}.
struct TailFit {
  bool available = false;
  std::string note;
  double alpha = 0.0;       // fitted exponent
  double rate = 0.0;        // fitted rate
  double gamma = 0.0;       // WKB prefactor exponent used by the fit
  double C1 = 0.0, C2 = 0.0;
  double phase_rms = 0.0;   // relative residual of the fixed-frequency bundle fit
  int extrema = 0;
  double y_lo = 0.0, y_hi = 0.0;
  double algebraic_amplitude = 0.0;  // fitted C0
  bool algebraic_detected = false;
};

struct ProfileDiagnostics {
  double sup_norm = 0.0;
  double f_at_0 = 0.0;
  double mass = 0.0;
  double p_mass = 0.0;
  double ode_residual = 0.0;            // max-norm residual of the discrete problem
  double mass_identity_residual = 0.0;  // |p_mass + c_1 mass|
  double parity_defect = 0.0;           // even profiles: max(|f'(0)|, |f'''(0)|) from central differences
  TailFit tail;
};

struct SolverStats {
  int iterations = 0;
  int halvings = 0;
  std::vector<double> residual_history;
  double final_update = 0.0;
  bool regularized = false;
  std::string termination;
};

struct Profile {
  ModelParams params{2, 1, 5.0};
  Grid grid;
  Symmetry symmetry = Symmetry::Even;
  std::vector<double> values;
  ProfileDiagnostics diag;
  std::string seed_provenance;
  SolverStats stats;
};

struct SolverOptions {
  double newton_tol = 1e-10;    // max-norm residual target, within [1e-12, 1e-6]
  double eps_reg = 1e-12;       // smoothing of |f|^p for p < 2
  int max_iterations = 200;
  int max_halvings = 40;
  double trivial_tol = 1e-8;    // sup norm below which an iterate is trivial
  double rel_update_tol = 1e-6; // ||df|| / ||f|| required together with the residual target
  double stall_update_tol = 1e-12;  // ||df|| / ||f|| accepted at the roundoff floor of the residual
  bool tail_diagnostics = true;
  void validate() const;
};

/// Discrete similarity-profile problem
///   B f + f/(p-1) + |f|^p = 0,  f = f' = 0 at |y| = L,
/// for a fixed grid and symmetry class; p is passed per call so that
/// continuation can reuse the operator.
class ProfileProblem {
 public:
  ProfileProblem(int m, int N, Grid grid);

  const Discretization& disc() const { return disc_; }
  const Grid& grid() const { return disc_.grid(); }
  int n() const { return disc_.n(); }
  int m() const { return disc_.m(); }
  int N() const { return disc_.N(); }

  /// Residual with Dirichlet rows R_i = f_i. eps_reg > 0 (used for p < 2)
  /// replaces |f|^p by (f^2 + eps^2)^{p/2} - eps^p.
  template <class T>
  void residual(std::span<const T> f, double p, std::span<T> out, double eps_reg = 0.0) const;
  /// Linear part only, with c in place of 1/(p-1).
  template <class T>
  void linear_residual(std::span<const T> f, double c, std::span<T> out) const;

  BandedMatrix jacobian(std::span<const double> f, double p, double eps_reg = 0.0) const;
  /// dR/dp at fixed f.
  std::vector<double> dR_dp(std::span<const double> f, double p) const;

 private:
  Discretization disc_;
  BandedMatrix lin_;
};

enum class SolveOutcome { Converged, Trivial, Diverged };
const char* to_string(SolveOutcome o);

struct SolveResult {
  SolveOutcome outcome = SolveOutcome::Diverged;
  Profile profile;  // converged profile, or the last iterate on failure
};

std::vector<double> assemble_residual(const Profile& profile);
BandedMatrix assemble_jacobian(const Profile& profile, double eps_reg = 0.0);

/// Damped Newton for the profile problem from the given seed.
SolveResult solve_profile(const ModelParams& params, const Grid& grid, Symmetry symmetry, std::vector<double> seed,
                          const SolverOptions& opts = {}, std::string provenance = "user seed");

/// Newton iteration starting from an extended-precision state, shared with
/// continuation. The state is updated in place.
SolveOutcome newton_solve(const ProfileProblem& problem, double p, std::vector<long double>& f,
                          const SolverOptions& opts, SolverStats& stats);

/// Fill all diagnostics of a profile from its values.
void compute_diagnostics(Profile& profile, bool with_tail = true);

/// int |f|^p + c_1 int f by the trapezoidal rule on the profile grid.
double verify_mass_identity(const Profile& profile);

TailFit tail_diagnostics(const Profile& profile);

/// Cubic interpolation of the profile at y (mirrored for even profiles).
double profile_value(const Profile& profile, double y);

/// u_S(x, t) = t^{-1/(p-1)} f(x t^{-1/2m}).
double similarity_solution_eval(const Profile& profile, double x, double t);

/// Samples of eps * psi_l on the nodes of a grid.
std::vector<double> eigenfunction_seed(const KernelTable& table, const Grid& grid, int l, double eps);

/// Even solution W of (B + 1/2) W = -|psi_1|^3 on the half line, m = 2, N = 1.
/// It is the cubic correction of the centre-manifold reduction at p_1 = 3.
std::vector<double> pitchfork_correction(const KernelTable& table, const Grid& half_grid);

/// Reduced pitchfork law at p_1 = 3 from the centre-manifold expansion
/// f = e psi_1 + |e|^3 W: p - 3 = 12 nu_W e^4 with nu_W = int psi_1 |psi_1| W y.
struct PitchforkReduction {
  double nu_w = 0.0;
  std::vector<double> W;  // on the half grid
  Grid half_grid;
  /// Amplitude e > 0 at p (NaN if p lies on the side without branches).
  double amplitude(double p) const;
  /// Seed e psi_1 + |e|^3 W sampled on a full-line grid.
  std::vector<double> seed(const KernelTable& table, const Grid& full_grid, double p, int sign) const;
};
PitchforkReduction pitchfork_reduction(const KernelTable& table, const Grid& half_grid);

}  // namespace polyheat
