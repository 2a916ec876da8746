#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "polyheat/continuation.hpp"
#include "polyheat/error.hpp"
#include "polyheat/io.hpp"
#include "polyheat/pipelines.hpp"

using namespace polyheat;

namespace {

Branch synthetic(const std::vector<double>& ps) {
  Branch b;
  b.grid = fixtures::half32();
  double s = 0.0;
  for (double p : ps) {
    BranchPoint pt;
    pt.p = p;
    pt.sup_norm = 1.0 + s;
    pt.arclength = s;
    s += 1.0;
    b.points.push_back(pt);
  }
  return b;
}

}  // namespace

TEST_SUITE("continuation") {
  TEST_CASE("short branch keeps every point on the solution set") {
    ContinuationOptions o;
    o.p_min = 5.5;
    o.p_max = 6.3;
    const Branch br = continue_branch(fixtures::f0_p6(), +1, o);
    REQUIRE(br.points.size() >= 3);
    CHECK(br.end.kind == EndpointKind::DomainLimit);
    CHECK(br.points.back().p == doctest::Approx(6.3).epsilon(1e-12));
    for (std::size_t i = 1; i < br.points.size(); ++i) {
      CHECK(br.points[i].p > br.points[i - 1].p);
      CHECK(br.points[i].arclength > br.points[i - 1].arclength);
      CHECK(br.points[i].mass_identity_residual <= 1e-5 * std::max(1.0, br.points[i].p_mass));
    }
    CHECK(br.folds.empty());
  }

  TEST_CASE("fold detection on a synthetic p-sequence") {
    const auto folds = detect_fold(synthetic({2.9, 2.8, 2.7, 2.65, 2.7, 2.8}));
    REQUIRE(folds.size() == 1);
    CHECK(folds[0].index == 3);
    CHECK(folds[0].p_lo <= 2.65);
    CHECK(folds[0].p_hi >= 2.65);
    CHECK(detect_fold(synthetic({1.0, 2.0, 3.0})).empty());
  }

  TEST_CASE("f_0 at p = 6 is hyperbolic") {
    for (const auto& e : linearization_spectrum(fixtures::f0_p6(), 6)) CHECK(std::abs(e.value) > 1e-3);
  }

  TEST_CASE("discrete bifurcation points approach p_l on long domains") {
    const Grid g = fixtures::half32();
    CHECK(std::abs(discrete_bifurcation_point(2, 1, g, 0) - 5.0) <= 1e-5);
    CHECK(std::abs(discrete_bifurcation_point(2, 1, g, 2) - 7.0 / 3.0) <= 1e-5);
    CHECK(std::abs(discrete_bifurcation_point(2, 1, g, 4) - 1.8) <= 1e-4);
  }

  TEST_CASE("profile from a bifurcation point continues to the target") {
    const Profile pr = profile_from_bifurcation(fixtures::table21(), ModelParams(2, 1, 5.2), fixtures::half32(), 0);
    CHECK(pr.params.p() == 5.2);
    CHECK(pr.diag.mass > 0);
    CHECK(pr.diag.ode_residual <= 1e-9);
    CHECK_THROWS_AS(profile_from_bifurcation(fixtures::table21(), ModelParams(2, 1, 3.0), fixtures::half32(), 1),
                    DomainError);
  }

  TEST_CASE("dipole branch: turning point is singular and refines") {
    const RunConfig cfg;
    const Branch br = dipole_branch(cfg, fixtures::table21());
    REQUIRE(br.folds.size() >= 1);
    const FoldRecord r = refine_fold(br, br.folds.front(), 1e-4, cfg.continuation_options());
    CHECK(r.refined);
    CHECK(r.p_hi - r.p_lo <= 1e-4);
    const Profile at = branch_profile(br, br.folds.front().index);
    double smallest = 1e300;
    for (const auto& e : linearization_spectrum(at, 3)) smallest = std::min(smallest, std::abs(e.value));
    CHECK(smallest <= 1e-3);
    CHECK(br.start.kind == EndpointKind::Bifurcation);
    CHECK(br.start.l == 1);
  }

  TEST_CASE("continuation rejects a trivial start or bad options") {
    Profile z = fixtures::f0_p6();
    std::fill(z.values.begin(), z.values.end(), 0.0);
    z.diag.sup_norm = 0.0;
    CHECK_THROWS_AS(continue_branch(z, 1), DomainError);
    ContinuationOptions o;
    o.ds_min = 1.0;
    CHECK_THROWS_AS(continue_branch(fixtures::f0_p6(), 1, o), DomainError);
  }
}
