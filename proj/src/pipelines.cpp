#include "polyheat/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "polyheat/error.hpp"
#include "polyheat/spectral.hpp"

namespace polyheat {

namespace fs = std::filesystem;

KernelTable pipeline_kernel(const RunConfig& cfg, int m, int N) {
  const double L = cfg.kernel_L > 0 ? cfg.kernel_L : default_kernel_length(m, N);
  return build_kernel_table(ModelParams::linear(m, N), L, cfg.kernel_nodes, cfg.kernel_kmax);
}

namespace {

Profile seed_near(const RunConfig& cfg, const KernelTable& table, double p, const Grid& grid, int l) {
  ContinuationOptions o = cfg.continuation_options();
  return profile_from_bifurcation(table, ModelParams(table.m(), table.N(), p), grid, l, o);
}

Branch trace(const RunConfig& cfg, const Profile& start, int dir, double p_min, double p_max, int max_points) {
  ContinuationOptions o = cfg.continuation_options();
  o.p_min = p_min;
  o.p_max = p_max;
  o.max_points = std::min(o.max_points, max_points);
  o.store_states = true;
  return continue_branch(start, dir, o);
}

std::string pname(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", p);
  return buf;
}

}  // namespace

Branch f0_upper_branch(const RunConfig& cfg, const KernelTable& table) {
  const Profile s = seed_near(cfg, table, 5.01, cfg.grid(Symmetry::Even), 0);
  return trace(cfg, s, +1, std::min(cfg.p_min, 5.0), cfg.p_max, cfg.max_points);
}

Branch f0_lower_branch(const RunConfig& cfg, const KernelTable& table) {
  const Profile s = seed_near(cfg, table, 4.99, cfg.grid(Symmetry::Even), 0);
  return trace(cfg, s, -1, std::max(cfg.p_min, 2.0), std::max(cfg.p_max, 5.0), cfg.max_points);
}

Branch even_branch_below(const RunConfig& cfg, const KernelTable& table, int l) {
  if (l < 2 || l % 2 == 1) throw DomainError("even_branch_below needs an even l >= 2");
  const double pl = bifurcation_exponent(table.m(), table.N(), l).value();
  const Profile s = seed_near(cfg, table, pl - 0.01, cfg.grid(Symmetry::Even), l);
  return trace(cfg, s, -1, cfg.p_min, std::max(cfg.p_max, pl), cfg.max_points);
}

Branch dipole_branch(const RunConfig& cfg, const KernelTable& table) {
  const Profile s = seed_near(cfg, table, 2.99, cfg.grid(Symmetry::None), 1);
  return trace(cfg, s, -1, std::max(cfg.p_min, 2.0), std::min(cfg.p_max, 8.0), 3000);
}

std::vector<Leg> branch_legs(const Branch& branch) {
  std::vector<Leg> legs;
  const int n = static_cast<int>(branch.points.size());
  if (n == 0) return legs;
  int first = 0;
  for (const auto& f : branch.folds) {
    legs.push_back({first, f.index});
    first = f.index;
  }
  legs.push_back({first, n - 1});
  return legs;
}

Profile profile_on_leg(const Branch& branch, const Leg& leg, double p, const SolverOptions& opts) {
  for (int i = leg.first; i < leg.last; ++i) {
    const double a = branch.points[i].p, b = branch.points[i + 1].p;
    if ((p - a) * (p - b) > 0) continue;
    if (branch.states[i].empty() || branch.states[i + 1].empty()) {
      throw DomainError("branch states around p = " + pname(p) + " are not stored");
    }
    const double t = a == b ? 0.0 : (p - a) / (b - a);
    std::vector<double> seed(branch.states[i].size());
    for (std::size_t k = 0; k < seed.size(); ++k) {
      seed[k] = (1 - t) * branch.states[i][k] + t * branch.states[i + 1][k];
    }
    SolveResult r = solve_profile(ModelParams(branch.m, branch.N, p), branch.grid, branch.symmetry, seed, opts,
                                  "interpolated branch state");
    if (r.outcome != SolveOutcome::Converged) {
      throw ConvergenceError("solve on the branch at p = " + pname(p) + " failed: " + r.profile.stats.termination,
                             r.profile.stats.residual_history.empty() ? 0.0 : r.profile.stats.residual_history.back());
    }
    return r.profile;
  }
  throw DomainError("p = " + pname(p) + " is not covered by this leg of the branch");
}

CsvTable profiles_table(const std::vector<Profile>& profiles, const std::vector<std::string>& names) {
  if (profiles.empty() || profiles.size() != names.size()) throw DomainError("profiles_table needs matching names");
  CsvTable t;
  t.columns.push_back("y");
  for (const auto& n : names) t.columns.push_back(n);
  const Grid& g = profiles.front().grid;
  for (int i = 0; i < g.n(); ++i) {
    const double y = g.y(i);
    std::vector<double> row{y};
    for (const auto& pr : profiles) {
      const bool same = pr.grid == g;
      row.push_back(same ? pr.values[i] : (std::abs(y) <= pr.grid.L() ? profile_value(pr, y) : 0.0));
    }
    t.rows.push_back(std::move(row));
  }
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& d = profiles[k].diag;
    t.comments.push_back(names[k] + ": p=" + format_double(profiles[k].params.p()) +
                         " N=" + std::to_string(profiles[k].params.N()) + " f(0)=" + format_double(d.f_at_0) +
                         " mass=" + format_double(d.mass) + " residual=" + format_double(d.ode_residual));
  }
  return t;
}

CsvTable branch_table(const Branch& branch, const Leg& leg) {
  CsvTable t;
  t.columns = {"p", "sup_norm", "f_at_0", "mass"};
  for (int i = leg.first; i <= leg.last; ++i) {
    const auto& pt = branch.points[i];
    t.rows.push_back({pt.p, pt.sup_norm, pt.f_at_0, pt.mass});
  }
  t.comments.push_back("start: " + std::string(to_string(branch.start.kind)) + " l=" + std::to_string(branch.start.l) +
                       "; end: " + to_string(branch.end.kind) + " l=" + std::to_string(branch.end.l) +
                       "; termination: " + branch.termination);
  for (const auto& f : branch.folds) {
    t.comments.push_back("turning point between p=" + format_double(f.p_lo) + " and p=" + format_double(f.p_hi));
  }
  return t;
}

std::vector<std::pair<std::string, std::string>> figure_catalogue() {
  return {
      {"fig1", "even profiles f_0 for p from 5.01 to 6.4"},
      {"fig2", "radial profiles f_0 at p = 6 for N = 1, 2, 3, 4"},
      {"fig3", "f_0(0) along the f_0 branch for p in [5.01, 200]"},
      {"fig4", "deformation of f_0 along its branch, p = 6 .. 200"},
      {"fig5", "profiles on both sides of p_0 = 5 (p = 5.01 and 4.99)"},
      {"fig6", "even branch from p_0 = 5 down to p_2 = 7/3"},
      {"fig7", "deformation of the profiles along the branch of fig6"},
      {"fig8", "through p_2: f_2 at p = 2.4 and f_4 at p = 2.25"},
      {"fig9", "through p_4: f_4 at p = 1.85 and f_6 at p = 1.75"},
      {"fig10", "dipole profile at p = 2.7"},
      {"fig11", "dipole branch and profiles for p in [2.7, 2.924]"},
      {"fig12", "dipole profiles close to the turning point"},
      {"fig13", "lower leg of the dipole branch, up to the turning point"},
      {"fig14", "upper leg of the dipole branch, after the turning point"},
      {"fig15", "deformation along the upper leg of the dipole branch"},
  };
}

FigureOutput reproduce_figure(const std::string& id, const RunConfig& cfg, const fs::path& dir) {
  FigureOutput out;
  out.id = id;
  const std::string hash = cfg.hash();
  auto emit = [&](const std::string& suffix, const CsvTable& t) {
    const fs::path path = dir / (id + "_" + suffix + ".csv");
    write_csv(path, t, hash);
    out.files.push_back(path);
  };
  auto profiles_at = [&](const Branch& br, const Leg& leg, const std::vector<double>& ps) {
    std::vector<Profile> prs;
    std::vector<std::string> names;
    for (double p : ps) {
      prs.push_back(profile_on_leg(br, leg, p, cfg.solver_options()));
      names.push_back("f_p" + pname(p));
    }
    return profiles_table(prs, names);
  };
  auto single = [](const Profile& p, const std::string& name) { return profiles_table({p}, {name}); };

  const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : figure_catalogue()) v.push_back(k);
    return v;
  }();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw DomainError("unknown figure id: " + id);

  const int m = 2, N = 1;
  if (id == "fig2") {
    std::vector<Profile> prs;
    std::vector<std::string> names;
    for (int n = 1; n <= 4; ++n) {
      RunConfig c = cfg;
      c.kernel_kmax = std::min(cfg.kernel_kmax, 2);  // only psi_0 is needed; radial columns are costly
      const KernelTable t = pipeline_kernel(c, m, n);
      prs.push_back(profile_from_bifurcation(t, ModelParams(m, n, 6.0), cfg.grid(Symmetry::Even), 0,
                                             cfg.continuation_options()));
      names.push_back("f_N" + std::to_string(n));
    }
    emit("profiles", profiles_table(prs, names));
    return out;
  }

  const KernelTable table = pipeline_kernel(cfg, m, N);
  const SolverOptions so = cfg.solver_options();
  if (id == "fig1" || id == "fig3" || id == "fig4") {
    RunConfig c = cfg;
    if (id == "fig1") c.p_max = 6.4;
    const Branch br = f0_upper_branch(c, table);
    const Leg all{0, static_cast<int>(br.points.size()) - 1};
    if (id == "fig1") emit("profiles", profiles_at(br, all, {5.01, 5.2, 5.5, 6.0, 6.4}));
    if (id == "fig3") emit("branch", branch_table(br, all));
    if (id == "fig4") emit("profiles", profiles_at(br, all, {6.0, 10.0, 20.0, 50.0, 100.0, 200.0}));
    if (br.points.back().p < c.p_max) out.notes.push_back("branch stopped before p_max: " + br.termination);
  } else if (id == "fig5") {
    const Profile up = seed_near(cfg, table, 5.01, cfg.grid(Symmetry::Even), 0);
    const Profile down = seed_near(cfg, table, 4.99, cfg.grid(Symmetry::Even), 0);
    emit("profiles", profiles_table({up, down}, {"f_p5.01", "f_p4.99"}));
  } else if (id == "fig6" || id == "fig7") {
    const Branch br = f0_lower_branch(cfg, table);
    const Leg all{0, static_cast<int>(br.points.size()) - 1};
    if (id == "fig6") {
      emit("branch", branch_table(br, all));
    } else {
      emit("profiles", profiles_at(br, all, {4.9, 4.5, 4.0, 3.5, 3.0, 2.6, 2.4}));
    }
  } else if (id == "fig8" || id == "fig9") {
    // Each transition pairs the branch arriving at p_l from above with the one leaving it below.
    const int l = id == "fig8" ? 2 : 4;
    const double pa = id == "fig8" ? 2.4 : 1.85, pb = id == "fig8" ? 2.25 : 1.75;
    const Branch above = l == 2 ? f0_lower_branch(cfg, table) : even_branch_below(cfg, table, 2);
    const Branch below = even_branch_below(cfg, table, l);
    const Profile a = profile_on_leg(above, {0, static_cast<int>(above.points.size()) - 1}, pa, so);
    const Profile b = profile_on_leg(below, {0, static_cast<int>(below.points.size()) - 1}, pb, so);
    emit("f" + std::to_string(l), single(a, "f_p" + pname(pa)));
    emit("f" + std::to_string(l + 2), single(b, "f_p" + pname(pb)));
  } else {
    const Branch br = dipole_branch(cfg, table);
    const std::vector<Leg> legs = branch_legs(br);
    const Leg lower = legs.front();
    const Leg upper = legs.size() > 1 ? legs[1] : legs.front();
    if (legs.size() < 2) out.notes.push_back("no turning point detected on the dipole branch");
    const double p_turn = br.points[lower.last].p;
    if (id == "fig10") {
      emit("profile", single(profile_on_leg(br, lower, 2.7, so), "f_p2.7"));
    } else if (id == "fig11") {
      emit("branch", branch_table(br, lower));
      emit("profiles", profiles_at(br, lower, {2.7, 2.8, 2.9, 2.924}));
    } else if (id == "fig12") {
      std::vector<Profile> prs{branch_profile(br, lower.last)};
      std::vector<std::string> names{"f_turn"};
      const double p_near = p_turn + 0.005;
      prs.push_back(profile_on_leg(br, lower, p_near, so));
      names.push_back("f_lower_p" + pname(p_near));
      if (legs.size() > 1) {
        prs.push_back(profile_on_leg(br, upper, p_near, so));
        names.push_back("f_upper_p" + pname(p_near));
      }
      emit("profiles", profiles_table(prs, names));
    } else if (id == "fig13") {
      emit("branch", branch_table(br, lower));
    } else if (id == "fig14") {
      emit("branch", branch_table(br, upper));
    } else if (id == "fig15") {
      std::vector<double> ps;
      const double a = br.points[upper.first].p, b = br.points[upper.last].p;
      for (int k = 0; k < 5; ++k) ps.push_back(a + (b - a) * (0.05 + 0.9 * k / 4.0));
      emit("profiles", profiles_at(br, upper, ps));
    }
  }
  return out;
}

}  // namespace polyheat
