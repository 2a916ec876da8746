#pragma once

#include <string>
#include <vector>

#include "polyheat/grid.hpp"
#include "polyheat/kernel.hpp"
#include "polyheat/model.hpp"

namespace polyheat {

/// a_0 = 3 * 2^{-8/3}, the far-field constant of the m = 2 bundle.
double bundle_a0();

/// e^{-(a_0/2) y^{4/3}} [C1 cos((a_0 sqrt3/2) y^{4/3}) + C2 sin((a_0 sqrt3/2) y^{4/3})], m = 2 only.
double tail_eval(int m, double C1, double C2, double y);

/// Singular envelope f(y) ~ C0 (y - y0)^{-4/(p-1)} of f'''' = |f|^p.
struct BlowupEnvelope {
  double p = 0.0;
  double y0 = 0.0;
  double C0 = 0.0;
  double eval(double y) const;  // valid for y > y0
};

/// Positive root of C0^{p-1} = k(k+1)(k+2)(k+3), k = 4/(p-1); m = 2 only.
double blowup_constant(double p, int m = 2);
BlowupEnvelope blowup_envelope(double p, double y0);

/// |a| ~ prefactor * tau^exponent fitted by least squares in log-log form.
struct PowerLawFit {
  bool available = false;
  double exponent = 0.0;
  double prefactor = 0.0;  // signed: a ~ prefactor * tau^exponent
  double tau_lo = 0.0, tau_hi = 0.0;
  int samples = 0;
};

struct CentreTrajectory {
  std::vector<double> tau;
  std::vector<double> a;
  bool blew_up = false;
  double blowup_tau = 0.0;       // integrated time at which |a| crossed the guard
  double blowup_tau_exact = 0.0; // closed-form blow-up time of the separable ODE
  PowerLawFit fit;               // over the final decade [tau_end/10, tau_end]
};

struct CentreOdeOptions {
  double rtol = 1e-11;
  double atol = 1e-14;
  double guard = 1e12;
  int samples_per_decade = 40;
};

/// Integrates da/dtau = kappa |a|^p on [tau0, tau_end] with adaptive Dormand-Prince steps.
CentreTrajectory centre_ode_integrate(double kappa, double p, double a_init, double tau0, double tau_end,
                                      const CentreOdeOptions& opts = {});

/// Closed-form solution of the separable centre ODE (NaN past blow-up).
double centre_ode_exact(double kappa, double p, double a_init, double tau0, double tau);

struct RescaledState {
  double tau = 0.0;
  Grid grid;
  std::vector<double> v;
  std::vector<double> projections;  // <v, psi*_l>, l = 0..l_max
  double sup_norm = 0.0;
};

struct EvolveOptions {
  double dt0 = 1e-3;
  double dt_min = 1e-9;
  double dt_max = 0.25;
  double tol = 1e-7;            // step-doubling error target, relative to max(1e-12, sup |v|)
  double blowup_guard = 1e6;
  double checkpoint_every = 0.25;
  int l_max = 4;
  bool nonlinear = true;
  void validate() const;
};

enum class EvolveOutcome { Completed, BlowUp, StepFailure };
const char* to_string(EvolveOutcome o);

struct Trajectory {
  EvolveOutcome outcome = EvolveOutcome::Completed;
  std::vector<RescaledState> checkpoints;
  int steps = 0;
  int rejected = 0;
  std::string note;
};

/// Initial state e * psi_l sampled on a grid, with projections filled in.
RescaledState eigenmode_state(const KernelTable& table, const Grid& grid, int l, double amplitude, int l_max = 4);

/// Projections <v, psi*_l> by quadrature on the state grid. On half-line grids
/// odd indices are zero by symmetry.
std::vector<double> project(const Grid& grid, int m, int N, std::span<const double> v, int l_max);

/// Rescaled-flow evolution v_tau = B v + v/(p-1) + |v|^p with f = f' = 0 at |y| = L.
/// The linear part is implicit, |v|^p explicit, with step-doubling error control.
Trajectory evolve_rescaled(const ModelParams& params, const RescaledState& init, double tau_end,
                           const EvolveOptions& opts = {});

/// Least-squares slope of log(sup_norm) against tau over checkpoints in [tau_lo, tau_hi].
double log_norm_slope(const Trajectory& traj, double tau_lo, double tau_hi);

/// Power law of a projection coefficient over checkpoints in [tau_lo, tau_hi].
PowerLawFit projection_power_law(const Trajectory& traj, int l, double tau_lo, double tau_hi);

/// coeff * t^{-(N+l)/2m} psi_l(x t^{-1/2m}).
double linearized_pattern_eval(const KernelTable& table, int l, double coeff, double x, double t);

/// Logarithmically perturbed pattern at p = p_l:
/// -sign(kappa) [2m|kappa|/(N+l)]^{-(N+l)/2m} (t ln t)^{-(N+l)/2m} psi_l(x t^{-1/2m}), t > 1.
double linearized_pattern_log_eval(const KernelTable& table, int l, double kappa, double x, double t);

}  // namespace polyheat
