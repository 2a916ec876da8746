#include "polyheat/profile.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "polyheat/error.hpp"
#include "polyheat/spectral.hpp"

namespace polyheat {
namespace {

using ld = long double;

template <class T>
T nonlinearity(T f, T p, T eps) {
  if (eps > 0) return std::pow(f * f + eps * eps, p / 2) - std::pow(eps, p);
  return std::pow(std::abs(f), p);
}

double nonlinearity_derivative(double f, double p, double eps) {
  if (eps > 0) {
    const double r2 = f * f + eps * eps;
    return p * std::pow(r2, 0.5 * (p - 1.0)) * f / std::sqrt(r2);
  }
  if (f == 0.0) return 0.0;
  return p * std::pow(std::abs(f), p - 1.0) * (f > 0 ? 1.0 : -1.0);
}

template <class T>
T max_abs(std::span<const T> v) {
  T m = 0;
  for (const T& x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

const char* to_string(SolveOutcome o) {
  switch (o) {
    case SolveOutcome::Converged: return "converged";
    case SolveOutcome::Trivial: return "trivial";
    default: return "diverged";
  }
}

void SolverOptions::validate() const {
  if (!(newton_tol >= 1e-12 && newton_tol <= 1e-6)) throw DomainError("newton_tol must lie in [1e-12, 1e-6]");
  if (!(eps_reg >= 0.0)) throw DomainError("eps_reg must be >= 0");
  if (max_iterations < 1 || max_halvings < 0) throw DomainError("invalid Newton iteration limits");
}

ProfileProblem::ProfileProblem(int m, int N, Grid grid) : disc_(m, N, grid), lin_(disc_.matrix()) {}

template <class T>
void ProfileProblem::linear_residual(std::span<const T> f, double c, std::span<T> out) const {
  disc_.apply<T>(f, out);
  const T cc = static_cast<T>(c);
  for (int i = 0; i < n(); ++i) out[i] = disc_.is_dirichlet(i) ? f[i] : out[i] + cc * f[i];
}

template <class T>
void ProfileProblem::residual(std::span<const T> f, double p, std::span<T> out, double eps_reg) const {
  disc_.apply<T>(f, out);
  const T pp = static_cast<T>(p);
  const T c = T(1) / (pp - T(1));
  const T eps = static_cast<T>(eps_reg);
  for (int i = 0; i < n(); ++i) {
    out[i] = disc_.is_dirichlet(i) ? f[i] : out[i] + c * f[i] + nonlinearity<T>(f[i], pp, eps);
  }
}

template void ProfileProblem::residual<double>(std::span<const double>, double, std::span<double>, double) const;
template void ProfileProblem::residual<ld>(std::span<const ld>, double, std::span<ld>, double) const;
template void ProfileProblem::linear_residual<double>(std::span<const double>, double, std::span<double>) const;
template void ProfileProblem::linear_residual<ld>(std::span<const ld>, double, std::span<ld>) const;

BandedMatrix ProfileProblem::jacobian(std::span<const double> f, double p, double eps_reg) const {
  BandedMatrix J = lin_;
  const double c = 1.0 / (p - 1.0);
  for (int i = 0; i < n(); ++i) {
    if (disc_.is_dirichlet(i)) {
      J.set_identity_row(i);
    } else {
      J(i, i) += c + nonlinearity_derivative(f[i], p, eps_reg);
    }
  }
  return J;
}

std::vector<double> ProfileProblem::dR_dp(std::span<const double> f, double p) const {
  std::vector<double> out(n(), 0.0);
  const double c = 1.0 / (p - 1.0);
  for (int i = 0; i < n(); ++i) {
    if (disc_.is_dirichlet(i)) continue;
    const double a = std::abs(f[i]);
    out[i] = -c * c * f[i] + (a > 0 ? std::pow(a, p) * std::log(a) : 0.0);
  }
  return out;
}

std::vector<double> assemble_residual(const Profile& profile) {
  const ProfileProblem prob(profile.params.m(), profile.params.N(), profile.grid);
  std::vector<ld> f(profile.values.begin(), profile.values.end()), r(f.size());
  prob.residual<ld>(f, profile.params.p(), r);
  return {r.begin(), r.end()};
}

BandedMatrix assemble_jacobian(const Profile& profile, double eps_reg) {
  if (!(eps_reg >= 0)) throw DomainError("eps_reg must be >= 0");
  const ProfileProblem prob(profile.params.m(), profile.params.N(), profile.grid);
  const double eps = profile.params.p() < 2.0 ? eps_reg : 0.0;
  return prob.jacobian(profile.values, profile.params.p(), eps);
}

SolveOutcome newton_solve(const ProfileProblem& problem, double p, std::vector<ld>& f, const SolverOptions& opts,
                          SolverStats& stats) {
  const int n = problem.n();
  const bool smooth = p < 2.0 && opts.eps_reg > 0.0;
  stats.regularized = smooth;
  std::vector<ld> r(n), trial(n), rt(n);
  std::vector<double> fd(n), step(n);

  auto run = [&](double eps, int max_it, bool final_pass) -> SolveOutcome {
    problem.residual<ld>(f, p, r, eps);
    ld rn = max_abs<ld>(r);
    for (int it = 0; it < max_it; ++it) {
      stats.residual_history.push_back(static_cast<double>(rn));
      const ld fn = max_abs<ld>(f);
      if (!std::isfinite(static_cast<double>(rn)) || fn > 1e8L) {
        stats.termination = "iterate blew up";
        return SolveOutcome::Diverged;
      }
      for (int i = 0; i < n; ++i) {
        fd[i] = static_cast<double>(f[i]);
        step[i] = -static_cast<double>(r[i]);
      }
      const BandedLU lu(problem.jacobian(fd, p, eps));
      if (lu.singular()) {
        stats.termination = "singular Jacobian";
        return SolveOutcome::Diverged;
      }
      lu.solve(step);
      ++stats.iterations;
      const ld sn = max_abs<double>(step);
      stats.final_update = static_cast<double>(sn);

      ld lam = 1;
      int halv = 0;
      ld rtn = 0;
      for (;; ++halv) {
        for (int i = 0; i < n; ++i) trial[i] = f[i] + lam * static_cast<ld>(step[i]);
        problem.residual<ld>(trial, p, rt, eps);
        rtn = max_abs<ld>(rt);
        if (rtn < (1 - 1e-4L * lam) * rn || final_pass) break;
        if (halv == opts.max_halvings) break;
        lam *= 0.5L;
      }
      stats.halvings += halv;
      const bool accepted = rtn < (1 - 1e-4L * lam) * rn || final_pass;
      if (!accepted) {
        // No decrease along the Newton direction: either the residual sits at
        // its roundoff floor or the iteration has failed.
        if (rn <= 100 * opts.newton_tol && sn <= opts.rel_update_tol * std::max<ld>(fn, 1e-300L)) {
          stats.termination = "residual at roundoff floor";
          return SolveOutcome::Converged;
        }
        stats.termination = "line search failed";
        return SolveOutcome::Diverged;
      }
      std::swap(f, trial);
      std::swap(r, rt);
      rn = rtn;
      const ld fnew = max_abs<ld>(f);
      if (fnew < opts.trivial_tol) {
        stats.termination = "converged to the trivial solution";
        return SolveOutcome::Trivial;
      }
      if (final_pass) {
        stats.residual_history.push_back(static_cast<double>(rn));
        stats.termination = "converged";
        return SolveOutcome::Converged;
      }
      const bool small_update = sn <= opts.rel_update_tol * fnew;
      if (lam == 1 && rn <= opts.newton_tol && small_update) {
        stats.residual_history.push_back(static_cast<double>(rn));
        stats.termination = "converged";
        return SolveOutcome::Converged;
      }
      if (lam == 1 && sn <= opts.stall_update_tol * fnew) {
        stats.residual_history.push_back(static_cast<double>(rn));
        stats.termination = "converged (update below roundoff)";
        return SolveOutcome::Converged;
      }
    }
    stats.termination = "iteration limit reached";
    return SolveOutcome::Diverged;
  };

  if (!smooth) return run(0.0, opts.max_iterations, false);
  const SolveOutcome o = run(opts.eps_reg, opts.max_iterations, false);
  if (o != SolveOutcome::Converged) return o;
  // One unregularized Newton step from the smoothed solution.
  return run(0.0, 1, true);
}

SolveResult solve_profile(const ModelParams& params, const Grid& grid, Symmetry symmetry, std::vector<double> seed,
                          const SolverOptions& opts, std::string provenance) {
  opts.validate();
  if (grid.half() != (symmetry == Symmetry::Even)) {
    throw DomainError("even profiles need a half-line grid and general profiles a full-line grid");
  }
  if (static_cast<int>(seed.size()) != grid.n()) throw DomainError("seed length does not match the grid");
  const ProfileProblem problem(params.m(), params.N(), grid);
  std::vector<ld> f(seed.begin(), seed.end());
  SolveResult res;
  res.profile.params = params;
  res.profile.grid = grid;
  res.profile.symmetry = symmetry;
  res.profile.seed_provenance = std::move(provenance);
  res.outcome = newton_solve(problem, params.p(), f, opts, res.profile.stats);
  res.profile.values.assign(f.begin(), f.end());
  if (res.outcome == SolveOutcome::Trivial) std::fill(res.profile.values.begin(), res.profile.values.end(), 0.0);
  compute_diagnostics(res.profile, opts.tail_diagnostics && res.outcome == SolveOutcome::Converged);
  if (!res.profile.stats.residual_history.empty()) {
    res.profile.diag.ode_residual = res.profile.stats.residual_history.back();
  }
  return res;
}

void compute_diagnostics(Profile& pr, bool with_tail) {
  const ProfileProblem problem(pr.params.m(), pr.params.N(), pr.grid);
  const auto& disc = problem.disc();
  const int n = pr.grid.n();
  auto& d = pr.diag;
  const double p = pr.params.p();
  d.sup_norm = max_abs<double>(pr.values);
  d.f_at_0 = profile_value(pr, 0.0);
  long double mass = 0, pmass = 0;
  for (int i = 0; i < n; ++i) {
    mass += disc.weights()[i] * static_cast<ld>(pr.values[i]);
    pmass += disc.weights()[i] * std::pow(std::abs(static_cast<ld>(pr.values[i])), static_cast<ld>(p));
  }
  d.mass = static_cast<double>(mass);
  d.p_mass = static_cast<double>(pmass);
  d.mass_identity_residual = std::abs(d.p_mass + pr.params.c1() * d.mass);
  const auto r = assemble_residual(pr);
  d.ode_residual = max_abs<double>(r);
  d.parity_defect = 0.0;
  if (pr.symmetry == Symmetry::Even) {
    // One-sided second-order differences, so the defect measures the discrete
    // symmetry conditions instead of vanishing through the mirrored ghosts.
    const auto& f = pr.values;
    const double h = pr.grid.h();
    const double d1 = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    const double d3 = (-5 * f[0] + 18 * f[1] - 24 * f[2] + 14 * f[3] - 3 * f[4]) / (2 * h * h * h);
    d.parity_defect = std::max(std::abs(d1), std::abs(d3));
  }
  d.tail = TailFit{};
  if (with_tail && d.sup_norm >= 1e-8) {
    d.tail = tail_diagnostics(pr);
  }
}

double verify_mass_identity(const Profile& pr) {
  const Discretization disc(pr.params.m(), pr.params.N(), pr.grid);
  long double mass = 0, pmass = 0;
  for (int i = 0; i < pr.grid.n(); ++i) {
    mass += disc.weights()[i] * static_cast<ld>(pr.values[i]);
    pmass += disc.weights()[i] * std::pow(std::abs(static_cast<ld>(pr.values[i])), static_cast<ld>(pr.params.p()));
  }
  return static_cast<double>(pmass + static_cast<ld>(pr.params.c1()) * mass);
}

TailFit tail_diagnostics(const Profile& pr) {
  TailFit tf;
  const int m = pr.params.m();
  const double p = pr.params.p();
  const double L = pr.grid.L();
  const int n = pr.grid.n();
  const double h = pr.grid.h();
  const double y_lo = 0.3 * L, y_hi = 0.85 * L;
  tf.y_lo = y_lo;
  tf.y_hi = y_hi;
  tf.gamma = wkb_prefactor_exponent(m, pr.params.N(), 1.0 / (p - 1.0));
  const auto& f = pr.values;
  const double noise = 1e-11 * std::max(1.0, max_abs<double>(f));

  // Right tail envelope: refined extrema of |f| (all samples when m = 1).
  std::vector<double> ys, logs;
  int i_lo = n, i_hi = 0;
  for (int i = 1; i < n - 1; ++i) {
    const double y = pr.grid.y(i);
    if (y < y_lo || y > y_hi) continue;
    i_lo = std::min(i_lo, i);
    i_hi = std::max(i_hi, i);
    if (m == 1) {
      if (std::abs(f[i]) > noise && i % 4 == 0) {
        ys.push_back(y);
        logs.push_back(std::log(std::abs(f[i])));
      }
      continue;
    }
    const double a = std::abs(f[i - 1]), b = std::abs(f[i]), c = std::abs(f[i + 1]);
    if (b >= a && b > c && b > noise) {
      const double den = f[i - 1] - 2 * f[i] + f[i + 1];
      const double off = den != 0.0 ? 0.5 * (f[i - 1] - f[i + 1]) / den : 0.0;
      const double peak = f[i] - 0.25 * (f[i - 1] - f[i + 1]) * off;
      ys.push_back(y + off * h);
      logs.push_back(std::log(std::abs(peak)));
    }
  }
  tf.extrema = static_cast<int>(ys.size());
  if (i_lo > i_hi) return tf;
  if (ys.size() < 5) {
    // No oscillating envelope to fit. The bundle fit further down still runs,
    // since a dominant algebraic tail is one way to lose the extrema.
    tf.note = "fewer than 5 tail extrema in the fit window";
  } else {
    for (std::size_t j = 0; j < ys.size(); ++j) logs[j] -= tf.gamma * std::log(ys[j]);
    auto linear_fit = [&](double alpha, double* icpt, double* rate) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double k = static_cast<double>(ys.size());
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double x = std::pow(ys[j], alpha);
        sx += x;
        sy += logs[j];
        sxx += x * x;
        sxy += x * logs[j];
      }
      const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
      const double b = (sy - slope * sx) / k;
      double rss = 0;
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double r = logs[j] - (b + slope * std::pow(ys[j], alpha));
        rss += r * r;
      }
      if (icpt) *icpt = b;
      if (rate) *rate = -slope;
      return rss;
    };
    double best_a = 1.0, best_r = std::numeric_limits<double>::infinity();
    // Golden-section search over alpha.
    double lo = 0.8, hi = 3.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = linear_fit(x1, nullptr, nullptr), f2 = linear_fit(x2, nullptr, nullptr);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = linear_fit(x1, nullptr, nullptr);
      } else {
        lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = linear_fit(x2, nullptr, nullptr);
      }
    }
    best_a = 0.5 * (lo + hi);
    best_r = linear_fit(best_a, nullptr, &tf.rate);
    (void)best_r;
    tf.alpha = best_a;
    tf.available = true;
  }

  // Fixed-frequency bundle fit on the normalized samples g = f / env, with an
  // extra basis function y^{-beta}/env that captures an algebraic component.
  if (m == 2) {
    const double a0 = 3.0 * std::pow(2.0, -8.0 / 3.0);
    const double w = a0 * std::sqrt(3.0) / 2.0;
    const double beta = 2.0 * m / (p - 1.0);
    double M[3][3] = {{0}}, v[3] = {0};
    std::vector<std::array<double, 4>> rows;
    for (int i = i_lo; i <= i_hi; ++i) {
      const double y = pr.grid.y(i);
      const double z = std::pow(y, 4.0 / 3.0);
      const double env = std::pow(y, tf.gamma) * std::exp(-0.5 * a0 * z);
      const double b[3] = {std::cos(w * z), std::sin(w * z), std::pow(y, -beta) / env};
      const double gy = f[i] / env;
      rows.push_back({b[0], b[1], b[2], gy});
      for (int r = 0; r < 3; ++r) {
        v[r] += b[r] * gy;
        for (int c = 0; c < 3; ++c) M[r][c] += b[r] * b[c];
      }
    }
    // 3x3 solve by Cramer's rule.
    auto det3 = [](double A[3][3]) {
      return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
             A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    };
    const double D = det3(M);
    double sol[3] = {0, 0, 0};
    if (D != 0.0) {
      for (int k = 0; k < 3; ++k) {
        double A[3][3];
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) A[r][c] = (c == k) ? v[r] : M[r][c];
        }
        sol[k] = det3(A) / D;
      }
    }
    tf.C1 = sol[0];
    tf.C2 = sol[1];
    tf.algebraic_amplitude = sol[2];
    double rss = 0, ss = 0;
    for (const auto& rw : rows) {
      const double model = sol[0] * rw[0] + sol[1] * rw[1] + sol[2] * rw[2];
      rss += (rw[3] - model) * (rw[3] - model);
      ss += rw[3] * rw[3];
    }
    tf.phase_rms = ss > 0 ? std::sqrt(rss / ss) : 0.0;
    const double y_end = pr.grid.y(i_hi);
    const double env_end = std::pow(y_end, tf.gamma) * std::exp(-0.5 * a0 * std::pow(y_end, 4.0 / 3.0)) *
                           std::hypot(tf.C1, tf.C2);
    const double alg_end = std::abs(tf.algebraic_amplitude) * std::pow(y_end, -beta);
    tf.algebraic_detected = alg_end > std::max(env_end, noise);
  }
  return tf;
}

double profile_value(const Profile& pr, double y) {
  const Grid& g = pr.grid;
  double s = y;
  if (g.half()) s = std::abs(y);
  const double x = (s - g.y(0)) / g.h();
  if (x < -1e-9 || x > g.n() - 1 + 1e-9) throw DomainError("profile_value: coordinate outside the grid");
  const int n = g.n();
  int i = std::clamp(static_cast<int>(std::floor(x)), 0, n - 2);
  const double t = x - i;
  if (t == 0.0) return pr.values[i];
  auto sample = [&](int j) {
    if (j < 0) return g.half() ? pr.values[-j] : pr.values[0];
    if (j >= n) return pr.values[n - 1];
    return pr.values[j];
  };
  const double y0 = sample(i - 1), y1 = sample(i), y2 = sample(i + 1), y3 = sample(i + 2);
  // Cubic Lagrange through four neighbouring nodes, local coordinate t in [0, 1).
  return y0 * (-t * (t - 1) * (t - 2) / 6.0) + y1 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
         y2 * (-(t + 1) * t * (t - 2) / 2.0) + y3 * ((t + 1) * t * (t - 1) / 6.0);
}

double similarity_solution_eval(const Profile& pr, double x, double t) {
  if (!(t > 0.0)) throw DomainError("similarity solution needs t > 0");
  const double m2 = 2.0 * pr.params.m();
  const double y = x * std::pow(t, -1.0 / m2);
  if (std::abs(y) > pr.grid.L() * (1 + 1e-12)) throw DomainError("rescaled coordinate outside the profile grid");
  return std::pow(t, -1.0 / (pr.params.p() - 1.0)) * profile_value(pr, y);
}

std::vector<double> eigenfunction_seed(const KernelTable& table, const Grid& grid, int l, double eps) {
  std::vector<double> s(grid.n());
  for (int i = 0; i < grid.n(); ++i) {
    const double y = grid.y(i);
    s[i] = std::abs(y) <= table.L() ? eps * eigenfunction_eval(table, l, y) : 0.0;
  }
  s.back() = 0.0;
  if (!grid.half()) s.front() = 0.0;
  return s;
}

std::vector<double> pitchfork_correction(const KernelTable& table, const Grid& half_grid) {
  if (table.m() != 2 || table.N() != 1) throw UnsupportedError("pitchfork correction is defined for m = 2, N = 1");
  if (!half_grid.half()) throw DomainError("pitchfork correction is computed on a half-line grid");
  const ProfileProblem prob(2, 1, half_grid);
  std::vector<double> zero(half_grid.n(), 0.0);
  // Jacobian at f = 0 and p = 3 is B + 1/2, which is invertible on even functions.
  BandedMatrix A = prob.jacobian(zero, 3.0);
  std::vector<double> rhs(half_grid.n());
  for (int i = 0; i < half_grid.n(); ++i) {
    const double psi1 = eigenfunction_eval(table, 1, half_grid.y(i));
    rhs[i] = prob.disc().is_dirichlet(i) ? 0.0 : -std::pow(std::abs(psi1), 3);
  }
  const BandedLU lu(std::move(A));
  lu.solve(rhs);
  return rhs;
}

PitchforkReduction pitchfork_reduction(const KernelTable& table, const Grid& half_grid) {
  PitchforkReduction r;
  r.half_grid = half_grid;
  r.W = pitchfork_correction(table, half_grid);
  const Discretization disc(2, 1, half_grid);
  long double s = 0;
  for (int i = 0; i < half_grid.n(); ++i) {
    const double y = half_grid.y(i);
    const double psi1 = eigenfunction_eval(table, 1, y);
    s += disc.weights()[i] * psi1 * std::abs(psi1) * r.W[i] * y;
  }
  r.nu_w = static_cast<double>(s);
  return r;
}

double PitchforkReduction::amplitude(double p) const {
  const double q = (p - 3.0) / (12.0 * nu_w);
  if (q < 0) return std::numeric_limits<double>::quiet_NaN();
  return std::pow(q, 0.25);
}

std::vector<double> PitchforkReduction::seed(const KernelTable& table, const Grid& full_grid, double p,
                                             int sign) const {
  const double e = amplitude(p);
  if (!std::isfinite(e)) throw DomainError("no pitchfork branch on this side of p = 3");
  std::vector<double> s(full_grid.n());
  const double es = sign >= 0 ? e : -e;
  for (int i = 0; i < full_grid.n(); ++i) {
    const double y = full_grid.y(i);
    double w = 0.0;
    const double x = std::abs(y) / half_grid.h();
    const int j = static_cast<int>(std::floor(x));
    if (j + 1 < half_grid.n()) {
      const double t = x - j;
      w = (1 - t) * W[j] + t * W[j + 1];
    }
    s[i] = es * eigenfunction_eval(table, 1, y) + e * e * e * w;
  }
  s.front() = s.back() = 0.0;
  return s;
}

}  // namespace polyheat
