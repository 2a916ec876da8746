#include "polyheat/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <boost/numeric/odeint.hpp>

#include "polyheat/banded.hpp"
#include "polyheat/error.hpp"
#include "polyheat/profile.hpp"
#include "polyheat/spectral.hpp"

namespace polyheat {
namespace {

PowerLawFit fit_power_law(const std::vector<double>& t, const std::vector<double>& a, double lo, double hi) {
  PowerLawFit f;
  f.tau_lo = lo;
  f.tau_hi = hi;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, sgn = 0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo * (1 - 1e-12) || t[i] > hi * (1 + 1e-12) || t[i] <= 0 || a[i] == 0.0) continue;
    const double x = std::log(t[i]), y = std::log(std::abs(a[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    sgn += a[i] > 0 ? 1 : -1;
    ++n;
  }
  f.samples = n;
  if (n < 2 || n * sxx - sx * sx <= 0) return f;
  f.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.prefactor = (sgn >= 0 ? 1.0 : -1.0) * std::exp((sy - f.exponent * sx) / n);
  f.available = true;
  return f;
}

}  // namespace

double bundle_a0() { return 3.0 * std::pow(2.0, -8.0 / 3.0); }

double tail_eval(int m, double C1, double C2, double y) {
  if (m != 2) throw UnsupportedError("tail_eval is implemented for m = 2");
  if (!(y >= 0.0)) throw DomainError("tail_eval needs y > 0");
  const double a0 = bundle_a0();
  const double z = std::pow(y, 4.0 / 3.0);
  const double w = 0.5 * a0 * std::sqrt(3.0);
  return std::exp(-0.5 * a0 * z) * (C1 * std::cos(w * z) + C2 * std::sin(w * z));
}

double blowup_constant(double p, int m) {
  if (m != 2) throw UnsupportedError("blow-up envelope is implemented for m = 2");
  if (!(p > 1.0)) throw DomainError("blow-up envelope needs p > 1");
  const double k = 4.0 / (p - 1.0);
  // log form keeps the root finite for p close to 1.
  const double lg = std::log(k) + std::log(k + 1) + std::log(k + 2) + std::log(k + 3);
  return std::exp(lg / (p - 1.0));
}

BlowupEnvelope blowup_envelope(double p, double y0) { return BlowupEnvelope{p, y0, blowup_constant(p)}; }

double BlowupEnvelope::eval(double y) const {
  if (!(y > y0)) throw DomainError("blow-up envelope is defined for y > y0");
  return C0 * std::pow(y - y0, -4.0 / (p - 1.0));
}

double centre_ode_exact(double kappa, double p, double a_init, double tau0, double tau) {
  if (kappa == 0.0 || a_init == 0.0) return a_init;
  const double s = a_init > 0 ? 1.0 : -1.0;
  const double base = std::pow(std::abs(a_init), 1.0 - p) - (p - 1.0) * s * kappa * (tau - tau0);
  if (base <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return s * std::pow(base, -1.0 / (p - 1.0));
}

CentreTrajectory centre_ode_integrate(double kappa, double p, double a_init, double tau0, double tau_end,
                                      const CentreOdeOptions& opts) {
  if (a_init == 0.0) throw DomainError("centre ODE needs a_init != 0");
  if (!(p > 1.0)) throw DomainError("centre ODE needs p > 1");
  if (!std::isfinite(tau0) || !std::isfinite(tau_end) || !(tau_end > tau0)) {
    throw DomainError("centre ODE needs a finite span with tau_end > tau0");
  }
  namespace ode = boost::numeric::odeint;
  using state = std::array<double, 1>;
  CentreTrajectory tr;
  const double s = a_init > 0 ? 1.0 : -1.0;
  if (s * kappa > 0) tr.blowup_tau_exact = tau0 + std::pow(std::abs(a_init), 1.0 - p) / ((p - 1.0) * s * kappa);
  auto rhs = [&](const state& x, state& dx, double) { dx[0] = kappa * std::pow(std::abs(x[0]), p); };

  // Geometric observation times in tau - tau0 + 1.
  const double T = tau_end - tau0;
  const int K = std::max(2, static_cast<int>(std::ceil(opts.samples_per_decade * std::log10(1.0 + T))));
  std::vector<double> obs(K + 1);
  for (int k = 0; k <= K; ++k) obs[k] = tau0 + std::pow(1.0 + T, static_cast<double>(k) / K) - 1.0;
  obs.back() = tau_end;

  auto stepper = ode::make_dense_output(opts.atol, opts.rtol, ode::runge_kutta_dopri5<state>());
  state x{a_init};
  stepper.initialize(x, tau0, 1e-6 * std::max(1.0, T));
  tr.tau.push_back(tau0);
  tr.a.push_back(a_init);
  std::size_t next = 1;
  while (next < obs.size()) {
    stepper.do_step(rhs);
    const double tc = stepper.current_time();
    while (next < obs.size() && obs[next] <= tc) {
      state xo;
      stepper.calc_state(obs[next], xo);
      tr.tau.push_back(obs[next]);
      tr.a.push_back(xo[0]);
      ++next;
    }
    const double ac = stepper.current_state()[0];
    if (!std::isfinite(ac) || std::abs(ac) > opts.guard) {
      tr.blew_up = true;
      tr.blowup_tau = tc;
      break;
    }
    if (stepper.current_time_step() < 1e-14 * std::max(1.0, std::abs(tc))) {
      tr.blew_up = true;
      tr.blowup_tau = tc;
      break;
    }
  }
  if (!tr.blew_up) tr.fit = fit_power_law(tr.tau, tr.a, tau_end / 10.0, tau_end);
  return tr;
}

void EvolveOptions::validate() const {
  if (!(dt_min > 0 && dt_min <= dt0 && dt0 <= dt_max)) throw DomainError("need 0 < dt_min <= dt0 <= dt_max");
  if (!(tol > 0)) throw DomainError("tol must be positive");
  if (!(blowup_guard > 0)) throw DomainError("blowup_guard must be positive");
  if (!(checkpoint_every > 0)) throw DomainError("checkpoint_every must be positive");
  if (l_max < 0) throw DomainError("l_max must be >= 0");
}

const char* to_string(EvolveOutcome o) {
  switch (o) {
    case EvolveOutcome::Completed: return "completed";
    case EvolveOutcome::BlowUp: return "blow-up";
    default: return "step-failure";
  }
}

std::vector<double> project(const Grid& grid, int m, int N, std::span<const double> v, int l_max) {
  const Discretization disc(m, N, grid);
  const auto& w = disc.weights();
  const int lm = N == 1 ? l_max : 0;
  std::vector<double> out(l_max + 1, 0.0);
  for (int l = 0; l <= lm; ++l) {
    if (grid.half() && l % 2 == 1) continue;
    const Polynomial q = l == 0 ? Polynomial{{1.0}} : adjoint_polynomial(m, N, l);
    long double s = 0;
    for (int i = 0; i < grid.n(); ++i) s += static_cast<long double>(w[i]) * v[i] * q(grid.y(i));
    out[l] = static_cast<double>(s);
  }
  if (N != 1) {
    for (int l = 1; l <= l_max; ++l) out[l] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

RescaledState eigenmode_state(const KernelTable& table, const Grid& grid, int l, double amplitude, int l_max) {
  RescaledState s;
  s.grid = grid;
  s.v = eigenfunction_seed(table, grid, l, amplitude);
  s.projections = project(grid, table.m(), table.N(), s.v, l_max);
  for (double x : s.v) s.sup_norm = std::max(s.sup_norm, std::abs(x));
  return s;
}

Trajectory evolve_rescaled(const ModelParams& params, const RescaledState& init, double tau_end,
                           const EvolveOptions& opts) {
  opts.validate();
  if (!(tau_end > init.tau)) throw DomainError("tau_end must exceed the initial tau");
  const Grid& grid = init.grid;
  if (static_cast<int>(init.v.size()) != grid.n()) throw DomainError("state length does not match its grid");
  const int m = params.m(), N = params.N();
  const double p = params.p();
  const ProfileProblem prob(m, N, grid);
  const int n = grid.n();
  const std::vector<double> zero(n, 0.0);
  // L = B + 1/(p-1) with Dirichlet identity rows.
  const BandedMatrix Lmat = prob.jacobian(zero, p);

  auto factor = [&](double dt) {
    BandedMatrix M = Lmat;
    for (int i = 0; i < n; ++i) {
      if (prob.disc().is_dirichlet(i)) continue;
      for (int j = std::max(0, i - M.lower()); j <= std::min(n - 1, i + M.upper()); ++j) M(i, j) *= -dt;
      M(i, i) += 1.0;
    }
    return BandedLU(std::move(M));
  };
  auto euler = [&](const BandedLU& lu, double dt, const std::vector<double>& v, std::vector<double>& out) {
    out.resize(n);
    for (int i = 0; i < n; ++i) {
      if (prob.disc().is_dirichlet(i)) {
        out[i] = 0.0;
      } else {
        out[i] = v[i] + (opts.nonlinear ? dt * std::pow(std::abs(v[i]), p) : 0.0);
      }
    }
    lu.solve(out);
  };
  auto supn = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
  };
  auto checkpoint = [&](double tau, const std::vector<double>& v) {
    RescaledState st;
    st.tau = tau;
    st.grid = grid;
    st.v = v;
    st.sup_norm = supn(v);
    st.projections = project(grid, m, N, v, opts.l_max);
    return st;
  };

  Trajectory tr;
  std::vector<double> v = init.v, v1, vh, v2;
  for (int i = 0; i < n; ++i) {
    if (prob.disc().is_dirichlet(i)) v[i] = 0.0;
  }
  double tau = init.tau;
  tr.checkpoints.push_back(checkpoint(tau, v));
  double next_cp = tau + opts.checkpoint_every;
  double dt = opts.dt0;
  double dt_cached = -1.0;
  std::optional<BandedLU> lu_full, lu_half;
  while (tau < tau_end * (1 - 1e-14)) {
    const double target = std::min(next_cp, tau_end);
    const bool lands = tau + dt >= target * (1 - 1e-13);
    const double h = lands ? target - tau : dt;
    if (h != dt_cached) {
      lu_full.emplace(factor(h));
      lu_half.emplace(factor(0.5 * h));
      dt_cached = h;
    }
    euler(*lu_full, h, v, v1);
    euler(*lu_half, 0.5 * h, v, vh);
    euler(*lu_half, 0.5 * h, vh, v2);
    double err = 0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(v2[i] - v1[i]));
    const double scale = std::max(supn(v2), 1e-300);
    const double rel = err / scale;
    if (rel <= opts.tol || h <= opts.dt_min) {
      for (int i = 0; i < n; ++i) v[i] = 2.0 * v2[i] - v1[i];
      tau = lands ? target : tau + h;
      ++tr.steps;
      const double s = supn(v);
      if (!std::isfinite(s) || s > opts.blowup_guard) {
        tr.checkpoints.push_back(checkpoint(tau, v));
        tr.outcome = EvolveOutcome::BlowUp;
        tr.note = "sup norm exceeded the blow-up guard";
        return tr;
      }
      if (lands) {
        tr.checkpoints.push_back(checkpoint(tau, v));
        next_cp += opts.checkpoint_every;
      }
      const double fac = rel > 0 ? 0.9 * std::sqrt(opts.tol / rel) : 2.0;
      if (!lands) dt = std::clamp(h * std::clamp(fac, 0.2, 2.0), opts.dt_min, opts.dt_max);
      else dt = std::clamp(dt * std::clamp(fac, 0.2, 2.0), opts.dt_min, opts.dt_max);
    } else {
      ++tr.rejected;
      dt = std::max(opts.dt_min, h * std::clamp(0.9 * std::sqrt(opts.tol / rel), 0.1, 0.5));
    }
  }
  return tr;
}

double log_norm_slope(const Trajectory& traj, double tau_lo, double tau_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& c : traj.checkpoints) {
    if (c.tau < tau_lo - 1e-12 || c.tau > tau_hi + 1e-12 || c.sup_norm <= 0) continue;
    const double y = std::log(c.sup_norm);
    sx += c.tau;
    sy += y;
    sxx += c.tau * c.tau;
    sxy += c.tau * y;
    ++n;
  }
  if (n < 2) throw InsufficientDataError("fewer than 2 checkpoints in the slope window");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

PowerLawFit projection_power_law(const Trajectory& traj, int l, double tau_lo, double tau_hi) {
  std::vector<double> t, a;
  for (const auto& c : traj.checkpoints) {
    if (l < static_cast<int>(c.projections.size())) {
      t.push_back(c.tau);
      a.push_back(c.projections[l]);
    }
  }
  return fit_power_law(t, a, tau_lo, tau_hi);
}

double linearized_pattern_eval(const KernelTable& table, int l, double coeff, double x, double t) {
  if (!(t > 0.0)) throw DomainError("pattern needs t > 0");
  const int m = table.m(), N = table.N();
  const double y = x * std::pow(t, -1.0 / (2.0 * m));
  if (std::abs(y) > table.L()) throw DomainError("rescaled coordinate outside the kernel table");
  return coeff * std::pow(t, -(N + l) / (2.0 * m)) * eigenfunction_eval(table, l, y);
}

double linearized_pattern_log_eval(const KernelTable& table, int l, double kappa, double x, double t) {
  if (!(t > 1.0)) throw DomainError("logarithmic pattern needs t > 1");
  if (kappa == 0.0) throw DomainError("logarithmic pattern needs kappa != 0");
  const int m = table.m(), N = table.N();
  const double e = (N + l) / (2.0 * m);
  const double y = x * std::pow(t, -1.0 / (2.0 * m));
  if (std::abs(y) > table.L()) throw DomainError("rescaled coordinate outside the kernel table");
  const double pref = -(kappa > 0 ? 1.0 : -1.0) * std::pow(2.0 * m * std::abs(kappa) / (N + l), -e);
  return pref * std::pow(t * std::log(t), -e) * eigenfunction_eval(table, l, y);
}

}  // namespace polyheat
