#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "polyheat/dynamics.hpp"
#include "polyheat/error.hpp"

using namespace polyheat;

TEST_SUITE("dynamics") {
  TEST_CASE("far-field constant matches the characteristic roots") {
    CHECK(std::abs(bundle_a0() - fixtures::kA0) <= 1e-15);
  }

  TEST_CASE("tail bundle solves the far-field equation asymptotically") {
    // -g'''' + y g'/4 + g/(p-1) = 0 to leading order: relative residual shrinks with y
    const double p = 6.0, h = 1e-3;
    auto rel = [&](double y) {
      auto g = [&](double s) { return tail_eval(2, 0.7, 0.4, s); };
      const double d1 = (g(y + h) - g(y - h)) / (2 * h);
      const double d4 = (g(y + 2 * h) - 4 * g(y + h) + 6 * g(y) - 4 * g(y - h) + g(y - 2 * h)) / std::pow(h, 4);
      const double lead = std::abs(y * d1 / 4);
      return std::abs(-d4 + y * d1 / 4 + g(y) / (p - 1)) / lead;
    };
    double prev = rel(5.0);
    for (double y : {8.0, 12.0}) {
      const double r = rel(y);
      CHECK(r < prev);
      prev = r;
    }
    CHECK(prev < 0.3);
  }

  TEST_CASE("blow-up constants") {
    CHECK(blowup_constant(5.0) == doctest::Approx(std::pow(24.0, 0.25)).epsilon(1e-14));
    CHECK(blowup_constant(2.0) == doctest::Approx(840.0).epsilon(1e-14));
    const BlowupEnvelope e = blowup_envelope(3.0, 1.0);
    // f'''' = |f|^p for the exact envelope f = C0 (y - y0)^{-2}
    const double y = 2.5;
    auto d4h = [&](double h) {
      return (e.eval(y + 2 * h) - 4 * e.eval(y + h) + 6 * e.eval(y) - 4 * e.eval(y - h) + e.eval(y - 2 * h)) /
             std::pow(h, 4);
    };
    // Richardson extrapolation removes the O(h^2) stencil error.
    const double d4 = (4.0 * d4h(2e-3) - d4h(4e-3)) / 3.0;
    CHECK(d4 == doctest::Approx(std::pow(e.eval(y), 3.0)).epsilon(1e-5));
    CHECK_THROWS_AS(e.eval(0.5), DomainError);
  }

  TEST_CASE("centre ODE agrees with the closed form") {
    const double k = fixtures::kKappa0;
    const CentreTrajectory c = centre_ode_integrate(k, 5.0, -1.0, 0.0, 1e4);
    CHECK_FALSE(c.blew_up);
    CHECK(c.a.back() == doctest::Approx(centre_ode_exact(k, 5.0, -1.0, 0.0, 1e4)).epsilon(1e-9));
    REQUIRE(c.fit.available);
    CHECK(c.fit.exponent == doctest::Approx(-0.25).epsilon(0.05));
    const CentreTrajectory b = centre_ode_integrate(k, 5.0, 2.0, 0.0, 1e6);
    CHECK(b.blew_up);
    CHECK(b.blowup_tau == doctest::Approx(b.blowup_tau_exact).epsilon(1e-6));
  }

  TEST_CASE("projections of a pure mode") {
    const auto& t = fixtures::table21();
    const RescaledState s = eigenmode_state(t, Grid::full_line(32.0, 5333), 2, 0.5);
    CHECK(s.projections[2] == doctest::Approx(0.5).epsilon(1e-6));
    for (int l : {0, 1, 3, 4}) CHECK(std::abs(s.projections[l]) <= 1e-6);
  }

  TEST_CASE("linear evolution of psi_2 decays at lambda_2 + 1/(p-1)") {
    EvolveOptions o;
    o.nonlinear = false;
    o.checkpoint_every = 0.5;
    const RescaledState s = eigenmode_state(fixtures::table21(), fixtures::half32(), 2, 1e-3);
    const Trajectory tr = evolve_rescaled(ModelParams(2, 1, 4.0), s, 4.0, o);
    REQUIRE(tr.outcome == EvolveOutcome::Completed);
    CHECK(log_norm_slope(tr, 1.0, 4.0) == doctest::Approx(-5.0 / 12.0).epsilon(0.01));
  }

  TEST_CASE("linearized patterns at t = 1 are the eigenfunctions") {
    const auto& t = fixtures::table21();
    CHECK(linearized_pattern_eval(t, 2, 0.3, 1.1, 1.0) == doctest::Approx(0.3 * eigenfunction_eval(t, 2, 1.1)));
    const double x = 0.7, tt = 16.0;
    CHECK(linearized_pattern_eval(t, 0, 1.0, x, tt) ==
          doctest::Approx(std::pow(tt, -0.25) * eigenfunction_eval(t, 0, x * 0.5)));
  }

  TEST_CASE("evolution options are validated") {
    EvolveOptions o;
    o.dt_min = -1.0;
    CHECK_THROWS_AS(o.validate(), DomainError);
  }
}
