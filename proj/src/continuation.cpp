#include "polyheat/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "polyheat/error.hpp"
#include "polyheat/spectral.hpp"

namespace polyheat {

Profile branch_profile_from(const Branch& br, std::vector<double> values, double p);

namespace {

using ld = long double;

// Continuation parameter q: equal to p below P, logarithmic above it. The map
// is C^1 at P, so secant predictors stay smooth across the switch.
struct ParamMap {
  double P;
  double q(double p) const { return p <= P ? p : P * (1.0 + std::log(p / P)); }
  double p(double q) const { return q <= P ? q : P * std::exp(q / P - 1.0); }
  double dp_dq(double q) const { return q <= P ? 1.0 : std::exp(q / P - 1.0); }
};

// Point on the extended state space (f, q) with the weighted inner product
// <X, Y> = sum_i w_i f_i g_i + q q'.
struct State {
  std::vector<ld> f;
  double q = 0.0;
};

class Tracer {
 public:
  Tracer(const ProfileProblem& prob, const ContinuationOptions& opts)
      : prob_(prob), opts_(opts), map_{opts.log_p_above}, w_(prob.disc().weights()) {}

  const ParamMap& map() const { return map_; }

  double dot_f(std::span<const ld> a, std::span<const double> b) const {
    ld s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<ld>(w_[i]) * a[i] * static_cast<ld>(b[i]);
    return static_cast<double>(s);
  }

  double reg(double p) const { return p < 2.0 ? opts_.solver.eps_reg : 0.0; }

  // Tangent (t_f, t_q) at a solution, normalized and oriented so that
  // orient * t_q > 0 (or along the reference direction when given).
  void tangent(const State& X, std::vector<double>& tf, double& tq, const std::vector<double>* ref_f,
               double ref_q, double orient) const {
    const int n = prob_.n();
    const double p = map_.p(X.q);
    std::vector<double> fd(X.f.begin(), X.f.end());
    const BandedLU lu(prob_.jacobian(fd, p, reg(p)));
    if (lu.singular()) throw ConvergenceError("singular Jacobian while computing a tangent", 0.0);
    std::vector<double> b = prob_.dR_dp(fd, p);
    const double dpq = map_.dp_dq(X.q);
    for (double& v : b) v *= dpq;
    lu.solve(b);
    tf.assign(n, 0.0);
    for (int i = 0; i < n; ++i) tf[i] = -b[i];
    tq = 1.0;
    double nrm = tq * tq;
    for (int i = 0; i < n; ++i) nrm += w_[i] * tf[i] * tf[i];
    nrm = std::sqrt(nrm);
    double sgn = orient;
    if (ref_f) {
      double d = ref_q * tq;
      for (int i = 0; i < n; ++i) d += w_[i] * tf[i] * (*ref_f)[i];
      sgn = d >= 0 ? 1.0 : -1.0;
    }
    for (double& v : tf) v *= sgn / nrm;
    tq *= sgn / nrm;
  }

  // Bordered Newton corrector on the hyperplane <X - pred, t> = 0.
  bool correct(State& X, const State& pred, std::span<const double> tf, double tq, SolverStats* stats,
               double* final_residual) const {
    const int n = prob_.n();
    std::vector<ld> R(n);
    std::vector<double> fd(n), a(n), b(n);
    for (int it = 0; it < opts_.corrector_max_iterations; ++it) {
      const double p = map_.p(X.q);
      if (!(p > 1.0) || !std::isfinite(p)) return false;
      prob_.residual<ld>(X.f, p, R, reg(p));
      ld rn = 0, fn = 0;
      for (int i = 0; i < n; ++i) {
        rn = std::max(rn, std::abs(R[i]));
        fn = std::max(fn, std::abs(X.f[i]));
      }
      if (!std::isfinite(static_cast<double>(rn)) || fn > 1e8L) return false;
      ld Nres = static_cast<ld>(X.q - pred.q) * tq;
      for (int i = 0; i < n; ++i) Nres += static_cast<ld>(w_[i]) * (X.f[i] - pred.f[i]) * static_cast<ld>(tf[i]);
      for (int i = 0; i < n; ++i) {
        fd[i] = static_cast<double>(X.f[i]);
        a[i] = -static_cast<double>(R[i]);
      }
      const BandedLU lu(prob_.jacobian(fd, p, reg(p)));
      if (lu.singular()) return false;
      b = prob_.dR_dp(fd, p);
      const double dpq = map_.dp_dq(X.q);
      for (double& v : b) v *= dpq;
      lu.solve(a);
      lu.solve(b);
      double ta = 0, tb = 0;
      for (int i = 0; i < n; ++i) {
        ta += w_[i] * tf[i] * a[i];
        tb += w_[i] * tf[i] * b[i];
      }
      const double den = tq - tb;
      if (den == 0.0 || !std::isfinite(den)) return false;
      const double dq = (-static_cast<double>(Nres) - ta) / den;
      double dn = 0;
      for (int i = 0; i < n; ++i) {
        const double d = a[i] - b[i] * dq;
        X.f[i] += d;
        dn = std::max(dn, std::abs(d));
      }
      X.q += dq;
      if (stats) {
        stats->residual_history.push_back(static_cast<double>(rn));
        ++stats->iterations;
      }
      const double scale = std::max(static_cast<double>(fn), 1e-300);
      const bool small = dn <= opts_.solver.rel_update_tol * scale && std::abs(dq) <= 1e-9 * std::max(1.0, X.q);
      if (rn <= opts_.solver.newton_tol && small) {
        prob_.residual<ld>(X.f, map_.p(X.q), R, reg(map_.p(X.q)));
        ld r2 = 0;
        for (int i = 0; i < n; ++i) r2 = std::max(r2, std::abs(R[i]));
        if (final_residual) *final_residual = static_cast<double>(r2);
        return r2 <= 10 * opts_.solver.newton_tol;
      }
      if (dn <= opts_.solver.stall_update_tol * scale && rn <= 100 * opts_.solver.newton_tol) {
        if (final_residual) *final_residual = static_cast<double>(rn);
        return true;
      }
    }
    return false;
  }

  double dist(const State& A, const State& B) const {
    ld s = static_cast<ld>(A.q - B.q) * (A.q - B.q);
    for (std::size_t i = 0; i < A.f.size(); ++i) s += static_cast<ld>(w_[i]) * (A.f[i] - B.f[i]) * (A.f[i] - B.f[i]);
    return static_cast<double>(std::sqrt(s));
  }

  double fnorm(const State& A) const {
    ld s = 0;
    for (std::size_t i = 0; i < A.f.size(); ++i) s += static_cast<ld>(w_[i]) * A.f[i] * A.f[i];
    return static_cast<double>(std::sqrt(s));
  }

 private:
  const ProfileProblem& prob_;
  const ContinuationOptions& opts_;
  ParamMap map_;
  const std::vector<double>& w_;
};

BranchPoint make_point(const Branch& br, const State& X, const ParamMap& map, double residual, double s) {
  Profile pr = branch_profile_from(br, std::vector<double>(X.f.begin(), X.f.end()), map.p(X.q));
  BranchPoint pt;
  pt.p = map.p(X.q);
  pt.sup_norm = pr.diag.sup_norm;
  pt.f_at_0 = pr.diag.f_at_0;
  pt.mass = pr.diag.mass;
  pt.p_mass = pr.diag.p_mass;
  pt.residual = residual;
  pt.mass_identity_residual = pr.diag.mass_identity_residual;
  pt.arclength = s;
  return pt;
}

}  // namespace

Profile branch_profile_from(const Branch& br, std::vector<double> values, double p) {
  Profile pr;
  pr.params = ModelParams(br.m, br.N, p);
  pr.grid = br.grid;
  pr.symmetry = br.symmetry;
  pr.values = std::move(values);
  pr.seed_provenance = "branch point";
  compute_diagnostics(pr, false);
  return pr;
}

const char* to_string(EndpointKind k) {
  switch (k) {
    case EndpointKind::Bifurcation: return "bifurcation";
    case EndpointKind::Fold: return "fold";
    case EndpointKind::DomainLimit: return "domain-limit";
    case EndpointKind::Failure: return "failure";
    case EndpointKind::Ambiguous: return "ambiguous";
    default: return "open";
  }
}

EndpointKind endpoint_kind_from_string(const std::string& s) {
  for (EndpointKind k : {EndpointKind::Bifurcation, EndpointKind::Fold, EndpointKind::DomainLimit,
                         EndpointKind::Failure, EndpointKind::Ambiguous, EndpointKind::Open}) {
    if (s == to_string(k)) return k;
  }
  throw DomainError("unknown endpoint kind: " + s);
}

void ContinuationOptions::validate() const {
  solver.validate();
  if (!(ds_min > 0 && ds_min <= ds && ds <= ds_max)) throw DomainError("need 0 < ds_min <= ds <= ds_max");
  if (!(grow >= 1.0) || grow_after < 1) throw DomainError("invalid step growth settings");
  if (!(p_min > 1.0 && p_min < p_max)) throw DomainError("need 1 < p_min < p_max");
  if (max_points < 2) throw DomainError("max_points must be >= 2");
  if (!(log_p_above > 1.0)) throw DomainError("log_p_above must exceed 1");
  if (!(amp_stop >= 0.0) || !(endpoint_tol > 0.0)) throw DomainError("invalid stopping tolerances");
  if (corrector_max_iterations < 1) throw DomainError("corrector_max_iterations must be >= 1");
}

Profile branch_profile(const Branch& branch, int index) {
  if (index < 0 || index >= static_cast<int>(branch.points.size())) throw DomainError("branch index out of range");
  if (index >= static_cast<int>(branch.states.size()) || branch.states[index].empty()) {
    throw DomainError("branch state not stored for this point");
  }
  return branch_profile_from(branch, branch.states[index], branch.points[index].p);
}

Branch continue_branch(const Profile& start, int direction, const ContinuationOptions& opts) {
  opts.validate();
  if (direction != 1 && direction != -1) throw DomainError("direction must be +1 or -1");
  if (start.diag.sup_norm < opts.solver.trivial_tol) throw DomainError("continuation needs a nontrivial start");
  const double p0 = start.params.p();
  if (p0 < opts.p_min || p0 > opts.p_max) throw DomainError("start p outside [p_min, p_max]");

  Branch br;
  br.m = start.params.m();
  br.N = start.params.N();
  br.symmetry = start.symmetry;
  br.grid = start.grid;
  const ProfileProblem prob(br.m, br.N, br.grid);
  const Tracer tr(prob, opts);
  const ParamMap& map = tr.map();
  const int n = prob.n();
  const double q_min = map.q(opts.p_min), q_max = map.q(opts.p_max);

  // Polish the start at fixed p so the first point is a solution of this grid.
  State cur;
  cur.f.assign(start.values.begin(), start.values.end());
  cur.q = map.q(p0);
  {
    SolverStats st;
    const SolveOutcome o = newton_solve(prob, p0, cur.f, opts.solver, st);
    if (o != SolveOutcome::Converged) throw ConvergenceError("start profile does not converge: " + st.termination, 0.0);
  }
  auto residual_of = [&](const State& X) {
    std::vector<ld> R(n);
    const double p = map.p(X.q);
    prob.residual<ld>(X.f, p, R);
    ld r = 0;
    for (const ld& v : R) r = std::max(r, std::abs(v));
    return static_cast<double>(r);
  };
  double s_total = 0.0;
  br.points.push_back(make_point(br, cur, map, residual_of(cur), 0.0));
  if (opts.store_states) br.states.emplace_back(cur.f.begin(), cur.f.end());

  std::vector<double> tf;
  double tq = 0.0;
  tr.tangent(cur, tf, tq, nullptr, 0.0, static_cast<double>(direction));
  double ds = opts.ds;
  int successes = 0;
  bool finished = false;
  EndpointKind end_kind = EndpointKind::Open;

  while (!finished && static_cast<int>(br.points.size()) < opts.max_points) {
    // Near a bifurcation from the trivial branch, limit the step by the amplitude.
    const double amp = tr.fnorm(cur);
    const double ds_eff = std::max(opts.ds_min, std::min(ds, 0.5 * amp));
    State pred;
    pred.f.resize(n);
    for (int i = 0; i < n; ++i) pred.f[i] = cur.f[i] + static_cast<ld>(ds_eff * tf[i]);
    pred.q = cur.q + ds_eff * tq;

    const bool beyond = pred.q > q_max || pred.q < q_min;
    if (beyond) {
      // Land on the boundary of the p-range by a fixed-p solve.
      const double q_target = pred.q > q_max ? q_max : q_min;
      const double frac = (q_target - cur.q) / (pred.q - cur.q);
      State land;
      land.f.resize(n);
      for (int i = 0; i < n; ++i) land.f[i] = cur.f[i] + frac * (pred.f[i] - cur.f[i]);
      land.q = q_target;
      SolverStats st;
      const SolveOutcome o = newton_solve(prob, map.p(q_target), land.f, opts.solver, st);
      if (o == SolveOutcome::Converged) {
        s_total += tr.dist(land, cur);
        br.points.push_back(make_point(br, land, map, residual_of(land), s_total));
        if (opts.store_states) br.states.emplace_back(land.f.begin(), land.f.end());
        br.termination = "reached the p-range limit";
        end_kind = EndpointKind::DomainLimit;
        break;
      }
      if (ds_eff <= opts.ds_min) {
        br.termination = "landing solve at the p-range limit failed";
        end_kind = EndpointKind::Failure;
        br.failure_state.assign(land.f.begin(), land.f.end());
        break;
      }
      ds = std::max(opts.ds_min, 0.5 * ds_eff);
      successes = 0;
      continue;
    }

    State X = pred;
    double rfinal = 0.0;
    const bool ok = tr.correct(X, pred, tf, tq, nullptr, &rfinal);
    const double step = ok ? tr.dist(X, cur) : 0.0;
    bool accept = ok && step <= 2.0 * ds_eff;
    double sup = 0;
    if (accept) {
      for (const ld& v : X.f) sup = std::max(sup, static_cast<double>(std::abs(v)));
      if (sup < opts.solver.trivial_tol) accept = false;
    }
    if (!accept) {
      if (ds_eff <= opts.ds_min * (1 + 1e-12)) {
        br.termination = ok ? "corrector left the branch at the minimum step" : "corrector failed at the minimum step";
        end_kind = EndpointKind::Failure;
        br.failure_state.assign(X.f.begin(), X.f.end());
        break;
      }
      ds = std::max(opts.ds_min, 0.5 * ds_eff);
      successes = 0;
      continue;
    }

    // Secant tangent for the next predictor.
    const double inv = 1.0 / step;
    for (int i = 0; i < n; ++i) tf[i] = static_cast<double>((X.f[i] - cur.f[i]) * inv);
    tq = (X.q - cur.q) * inv;
    s_total += step;
    cur = std::move(X);
    br.points.push_back(make_point(br, cur, map, rfinal, s_total));
    if (opts.store_states) br.states.emplace_back(cur.f.begin(), cur.f.end());
    if (++successes >= opts.grow_after) {
      ds = std::min(opts.ds_max, ds * opts.grow);
      successes = 0;
    }
    if (br.points.back().sup_norm < opts.amp_stop) {
      br.termination = "amplitude fell below amp_stop";
      finished = true;
    }
  }
  if (br.termination.empty()) br.termination = "max_points reached";

  br.folds = detect_fold(br);
  br.start = classify_endpoint(br, BranchEnd::Start, opts.endpoint_tol);
  if (end_kind == EndpointKind::Open) {
    br.end = classify_endpoint(br, BranchEnd::End, opts.endpoint_tol);
  } else {
    br.end.kind = end_kind;
    br.end.note = br.termination;
  }
  return br;
}

std::vector<FoldRecord> detect_fold(const Branch& br) {
  std::vector<FoldRecord> out;
  const auto& P = br.points;
  for (std::size_t i = 1; i + 1 < P.size(); ++i) {
    const double d0 = P[i].p - P[i - 1].p, d1 = P[i + 1].p - P[i].p;
    if (d0 * d1 >= 0.0) continue;
    FoldRecord fr;
    fr.index = static_cast<int>(i);
    // Parabola through the three points in arclength; its vertex extends the
    // bracket beyond the turning sample.
    const double s0 = P[i - 1].arclength, s1 = P[i].arclength, s2 = P[i + 1].arclength;
    const double a = ((P[i + 1].p - P[i].p) / (s2 - s1) - (P[i].p - P[i - 1].p) / (s1 - s0)) / (s2 - s0);
    const double b = (P[i].p - P[i - 1].p) / (s1 - s0) - a * (s1 + s0);
    double pv = P[i].p;
    if (a != 0.0) {
      const double sv = -b / (2 * a);
      pv = P[i - 1].p + (a * (sv * sv - s0 * s0) + b * (sv - s0));
    }
    const double lo = std::min({P[i - 1].p, P[i].p, P[i + 1].p, pv});
    const double hi = std::max({P[i - 1].p, P[i].p, P[i + 1].p, pv});
    // The fold value lies between the turning sample and the extremum.
    if (d0 > 0) {
      fr.p_lo = std::max(P[i - 1].p, P[i + 1].p);
      fr.p_hi = std::max(hi, P[i].p);
      fr.p_lo = std::min(fr.p_lo, P[i].p);
    } else {
      fr.p_hi = std::min(P[i - 1].p, P[i + 1].p);
      fr.p_lo = std::min(lo, P[i].p);
      fr.p_hi = std::max(fr.p_hi, P[i].p);
    }
    out.push_back(fr);
  }
  return out;
}

FoldRecord refine_fold(const Branch& br, const FoldRecord& fold, double width_target, const ContinuationOptions& opts) {
  if (!(width_target > 0)) throw DomainError("width_target must be positive");
  FoldRecord out = fold;
  if (fold.p_hi - fold.p_lo <= width_target) {
    out.refined = true;
    return out;
  }
  const int i = fold.index;
  if (i < 1 || i + 1 >= static_cast<int>(br.points.size())) throw DomainError("fold index out of range");
  if (static_cast<int>(br.states.size()) <= i + 1 || br.states[i - 1].empty() || br.states[i].empty() ||
      br.states[i + 1].empty()) {
    throw DomainError("refine_fold needs the stored states around the fold");
  }
  const ProfileProblem prob(br.m, br.N, br.grid);
  ContinuationOptions o = opts;
  o.corrector_max_iterations = std::max(o.corrector_max_iterations, 25);
  const Tracer tr(prob, o);
  const ParamMap& map = tr.map();
  const int n = prob.n();
  const bool is_max = br.points[i].p > br.points[i - 1].p;  // fold at a maximum of p

  auto state_of = [&](int k) {
    State X;
    X.f.assign(br.states[k].begin(), br.states[k].end());
    X.q = map.q(br.points[k].p);
    return X;
  };
  // Hyperplanes orthogonal to the chord from point i-1 to point i+1.
  const State A = state_of(i - 1), M = state_of(i), C = state_of(i + 1);
  std::vector<double> cf(n);
  double cq = C.q - A.q;
  {
    double nrm = cq * cq;
    const auto& w = prob.disc().weights();
    for (int j = 0; j < n; ++j) {
      cf[j] = static_cast<double>(C.f[j] - A.f[j]);
      nrm += w[j] * cf[j] * cf[j];
    }
    nrm = std::sqrt(nrm);
    for (double& v : cf) v /= nrm;
    cq /= nrm;
  }
  // Quadratic interpolation of the stored states in the chord parameter theta.
  const double dA = 0.0, dC = 1.0;
  double dM = 0.0;
  {
    ld num = static_cast<ld>(M.q - A.q) * cq, den = static_cast<ld>(C.q - A.q) * cq;
    const auto& w = prob.disc().weights();
    for (int j = 0; j < n; ++j) {
      num += static_cast<ld>(w[j]) * (M.f[j] - A.f[j]) * cf[j];
      den += static_cast<ld>(w[j]) * (C.f[j] - A.f[j]) * cf[j];
    }
    dM = static_cast<double>(num / den);
  }
  auto interp = [&](double th) {
    const double la = (th - dM) * (th - dC) / ((dA - dM) * (dA - dC));
    const double lm = (th - dA) * (th - dC) / ((dM - dA) * (dM - dC));
    const double lc = (th - dA) * (th - dM) / ((dC - dA) * (dC - dM));
    State X;
    X.f.resize(n);
    for (int j = 0; j < n; ++j) X.f[j] = la * A.f[j] + lm * M.f[j] + lc * C.f[j];
    X.q = la * A.q + lm * M.q + lc * C.q;
    return X;
  };
  // Sign of the tangent p-component at a corrected point, oriented along the chord.
  auto solve_at = [&](double th, State& X, double& tpsign) {
    const State pred = interp(th);
    X = pred;
    if (!tr.correct(X, pred, cf, cq, nullptr, nullptr)) return false;
    std::vector<double> tf;
    double tq = 0;
    tr.tangent(X, tf, tq, &cf, cq, 1.0);
    tpsign = tq >= 0 ? 1.0 : -1.0;
    return true;
  };
  double th_lo = dA, th_hi = dC;
  double p_lo_pt = br.points[i - 1].p, p_hi_pt = br.points[i + 1].p;
  double best_lo = fold.p_lo, best_hi = fold.p_hi;
  double p_mid_last = br.points[i].p, th_mid_last = dM;
  for (int iter = 0; iter < 60; ++iter) {
    const double th = 0.5 * (th_lo + th_hi);
    State X;
    double sg = 0;
    if (!solve_at(th, X, sg)) {
      out.warning = "corrector failed during fold refinement; returning the widest verified bracket";
      break;
    }
    const double pm = map.p(X.q);
    p_mid_last = pm;
    th_mid_last = th;
    // Before the fold the tangent p-component has the sign of the first leg.
    const double first_leg = is_max ? 1.0 : -1.0;
    if (sg == first_leg) {
      th_lo = th;
      p_lo_pt = pm;
    } else {
      th_hi = th;
      p_hi_pt = pm;
    }
    // Parabola vertex through the bracket ends and the latest midpoint.
    double pv = pm;
    {
      const double x0 = th_lo, x1 = th_mid_last, x2 = th_hi;
      if (x1 != x0 && x2 != x1) {
        const double y0 = p_lo_pt, y1 = p_mid_last, y2 = p_hi_pt;
        const double a = ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
        const double b = (y1 - y0) / (x1 - x0) - a * (x1 + x0);
        if (a != 0.0) {
          const double xv = std::clamp(-b / (2 * a), x0, x2);
          pv = y0 + a * (xv * xv - x0 * x0) + b * (xv - x0);
        }
      }
    }
    double lo, hi;
    if (is_max) {
      lo = std::min(p_lo_pt, p_hi_pt);
      hi = std::max({p_lo_pt, p_hi_pt, pv, pm});
    } else {
      hi = std::max(p_lo_pt, p_hi_pt);
      lo = std::min({p_lo_pt, p_hi_pt, pv, pm});
    }
    best_lo = lo;
    best_hi = hi;
    if (hi - lo <= width_target) {
      out.refined = true;
      break;
    }
  }
  out.p_lo = best_lo;
  out.p_hi = best_hi;
  if (!out.refined && out.warning.empty() && out.p_hi - out.p_lo > width_target) {
    out.warning = "bisection limit reached before the target width";
  }
  return out;
}

EndpointClass classify_endpoint(const Branch& br, BranchEnd which, double tol) {
  EndpointClass ec;
  const int np = static_cast<int>(br.points.size());
  if (np < 5) {
    ec.note = "fewer than 5 branch points";
    return ec;
  }
  // pts[4] is the terminal point.
  std::vector<BranchPoint> pts;
  for (int k = 0; k < 5; ++k) pts.push_back(which == BranchEnd::End ? br.points[np - 5 + k] : br.points[4 - k]);
  const double p_end = pts[4].p;
  for (int l = 0; l < 400; ++l) {
    const double pl = bifurcation_exponent(br.m, br.N, l).value();
    if (std::abs(p_end - pl) <= tol) ec.candidates.push_back(l);
  }
  bool monotone = true;
  for (int k = 1; k < 5; ++k) monotone = monotone && pts[k].sup_norm < pts[k - 1].sup_norm;
  if (ec.candidates.empty()) {
    ec.note = "terminal p is not within tolerance of any p_l";
    return ec;
  }
  if (ec.candidates.size() > 1) {
    ec.kind = EndpointKind::Ambiguous;
    ec.note = "several p_l within the endpoint tolerance";
    return ec;
  }
  if (!monotone) {
    ec.note = "sup_norm is not decreasing over the last 5 points";
    return ec;
  }
  ec.kind = EndpointKind::Bifurcation;
  ec.l = ec.candidates.front();
  ec.p_l = bifurcation_exponent(br.m, br.N, ec.l).value();
  const bool parity_zero = br.N == 1 && ec.l % 2 == 1;
  ec.predicted_exponent = parity_zero ? 1.0 / (2.0 * (ec.p_l - 1.0)) : 1.0 / (ec.p_l - 1.0);
  // Fit window: the 5 terminal-most points whose offset from the bifurcation
  // point is resolvable. Closer points carry no information on the exponent
  // once |p - p_l| approaches the corrector accuracy in p.
  constexpr double kOffsetFloor = 1e-6;
  auto fit = [&](double pl, bool* ok) {
    std::vector<BranchPoint> win;
    for (int k = np - 1; k >= 0 && win.size() < 5; --k) {
      const BranchPoint& pt = br.points[which == BranchEnd::End ? k : np - 1 - k];
      if (std::abs(pt.p - pl) >= kOffsetFloor) win.push_back(pt);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& pt : win) {
      const double dp = std::abs(pt.p - pl);
      if (dp <= 0.0 || pt.sup_norm <= 0.0) continue;
      const double x = std::log(dp), y = std::log(pt.sup_norm);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
    *ok = cnt >= 2 && cnt * sxx - sx * sx > 0;
    return *ok ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
  };
  ec.p_l_discrete = discrete_bifurcation_point(br.m, br.N, br.grid, ec.l);
  bool ok1 = false, ok2 = false;
  ec.exponent = fit(ec.p_l_discrete, &ok1);
  ec.exponent_exact = fit(ec.p_l, &ok2);
  if (!ok1) ec.note = "exponent fit unavailable";
  return ec;
}

double discrete_bifurcation_point(int m, int N, const Grid& grid, int l) {
  const double pl = bifurcation_exponent(m, N, l).value();
  Profile zero;
  zero.params = ModelParams(m, N, pl);
  zero.grid = grid;
  zero.symmetry = grid.half() ? Symmetry::Even : Symmetry::None;
  zero.values.assign(grid.n(), 0.0);
  // At p = p_l the mode-l eigenvalue of B + 1/(p-1) is close to zero.
  const auto ev = linearization_spectrum(zero, 1, 0.0);
  if (ev.empty()) throw ConvergenceError("no eigenvalue found near zero", 0.0);
  const double c = 1.0 / (pl - 1.0) - ev.front().value.real();
  return 1.0 + 1.0 / c;
}

std::vector<EigenEstimate> linearization_spectrum(const Profile& pr, int k, double shift) {
  if (k < 1) throw DomainError("k must be >= 1");
  const ProfileProblem prob(pr.params.m(), pr.params.N(), pr.grid);
  const int n = prob.n();
  const double p = pr.params.p();
  BandedMatrix J = prob.jacobian(pr.values, p);
  // Dirichlet rows sit at eigenvalue 1e8 so they stay out of the way.
  constexpr double kDirichlet = 1e8;
  for (int i = 0; i < n; ++i) {
    if (prob.disc().is_dirichlet(i)) J.set_identity_row(i, kDirichlet);
  }
  BandedMatrix S = J;
  for (int i = 0; i < n; ++i) S(i, i) -= shift;
  const BandedLU lu(S);
  if (lu.singular()) throw ConvergenceError("shift coincides with an eigenvalue", 0.0);

  const int mk = std::min(n - 1, std::max(4 * k + 40, 80));
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, mk + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(mk + 1, mk);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = prob.disc().is_dirichlet(i) ? 0.0 : nd(rng);
  V.col(0) = v.normalized();
  int dim = mk;
  for (int j = 0; j < mk; ++j) {
    Eigen::VectorXd w = V.col(j);
    lu.solve(std::span<double>(w.data(), n));
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        const double hij = V.col(i).dot(w);
        H(i, j) += hij;
        w -= hij * V.col(i);
      }
    }
    const double hn = w.norm();
    H(j + 1, j) = hn;
    if (hn < 1e-14) {
      dim = j + 1;
      break;
    }
    V.col(j + 1) = w / hn;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(H.topLeftCorner(dim, dim));
  std::vector<EigenEstimate> out;
  const auto evals = es.eigenvalues();
  const auto evecs = es.eigenvectors();
  for (int j = 0; j < dim; ++j) {
    const std::complex<double> theta = evals[j];
    if (std::abs(theta) < 1e-300) continue;
    EigenEstimate e;
    e.value = shift + 1.0 / theta;
    if (std::abs(e.value) > 0.5 * kDirichlet) continue;
    const Eigen::VectorXcd x = V.leftCols(dim).cast<std::complex<double>>() * evecs.col(j);
    Eigen::VectorXd xr = x.real(), xi = x.imag(), yr(n), yi(n);
    J.multiply(std::span<const double>(xr.data(), n), std::span<double>(yr.data(), n));
    J.multiply(std::span<const double>(xi.data(), n), std::span<double>(yi.data(), n));
    const Eigen::VectorXcd Ax = yr.cast<std::complex<double>>() + std::complex<double>(0, 1) * yi.cast<std::complex<double>>();
    e.residual = (Ax - e.value * x).norm() / x.norm();
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [&](const EigenEstimate& a, const EigenEstimate& b) {
    return std::abs(a.value - shift) < std::abs(b.value - shift);
  });
  if (static_cast<int>(out.size()) > k) out.resize(k);
  return out;
}

Profile profile_from_bifurcation(const KernelTable& table, const ModelParams& target, const Grid& grid, int l,
                                 const ContinuationOptions& opts) {
  const int m = target.m(), N = target.N();
  if (table.m() != m || table.N() != N) throw DomainError("kernel table does not match the model");
  const double pl = bifurcation_exponent(m, N, l).value();
  const double pt = target.p();
  if (pt == pl) throw DomainError("target p coincides with p_l; only the trivial solution bifurcates there");
  const Symmetry sym = grid.half() ? Symmetry::Even : Symmetry::None;
  if (grid.half() && l % 2 == 1) throw DomainError("odd modes need a full-line grid");
  const int side = pt > pl ? 1 : -1;
  constexpr double kOffset = 0.01;
  const double p_start = std::abs(pt - pl) <= kOffset ? pt : pl + side * kOffset;
  const ModelParams start_params(m, N, p_start);

  std::vector<double> seed;
  std::string provenance;
  const BifurcationCoefficients bc = bifurcation_coefficients(table, l);
  if (bc.c_hat) {
    const auto amp = local_branch_amplitude(bc, p_start);
    seed = eigenfunction_seed(table, grid, l, amp.front().eps);
    provenance = "local amplitude law at p = " + std::to_string(p_start) + ", l = " + std::to_string(l);
  } else if (m == 2 && N == 1 && l == 1 && !grid.half()) {
    const Grid half = Grid::half_line(grid.L(), (grid.n() + 1) / 2);
    const PitchforkReduction red = pitchfork_reduction(table, half);
    if (!std::isfinite(red.amplitude(p_start))) {
      throw DomainError("no pitchfork branch on this side of p_1 = 3");
    }
    seed = red.seed(table, grid, p_start, 1);
    provenance = "centre-manifold reduction at p = " + std::to_string(p_start);
  } else {
    throw UnsupportedError("no seeding rule for this bifurcation index");
  }
  SolveResult r = solve_profile(start_params, grid, sym, seed, opts.solver, provenance);
  if (r.outcome != SolveOutcome::Converged) {
    throw ConvergenceError("seed solve near p_l failed: " + r.profile.stats.termination,
                           r.profile.stats.residual_history.empty() ? 0.0 : r.profile.stats.residual_history.back());
  }
  if (p_start == pt) return r.profile;
  ContinuationOptions o = opts;
  o.store_states = true;
  if (side > 0) {
    o.p_min = std::min(opts.p_min, p_start - kOffset);
    o.p_max = pt;
  } else {
    o.p_max = std::max(opts.p_max, p_start + kOffset);
    o.p_min = pt;
  }
  o.amp_stop = std::max(opts.amp_stop, 0.0);
  const Branch br = continue_branch(r.profile, side, o);
  if (br.end.kind != EndpointKind::DomainLimit || std::abs(br.points.back().p - pt) > 1e-12 * pt) {
    throw ConvergenceError("continuation did not reach the target p: " + br.termination, 0.0);
  }
  // Polish at exactly p = pt so the returned profile meets the Newton tolerance
  // rather than the looser arclength corrector tolerance.
  const Profile last = branch_profile(br, static_cast<int>(br.points.size()) - 1);
  SolveResult fin = solve_profile(target, grid, sym, last.values, opts.solver,
                                  provenance + ", continued to p = " + std::to_string(pt));
  if (fin.outcome != SolveOutcome::Converged) {
    throw ConvergenceError("final solve at the target p failed: " + fin.profile.stats.termination,
                           fin.profile.stats.residual_history.empty() ? 0.0 : fin.profile.stats.residual_history.back());
  }
  return fin.profile;
}

}  // namespace polyheat
