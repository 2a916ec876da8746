#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "polyheat/spectral.hpp"

using namespace polyheat;

TEST_SUITE("spectral") {
  TEST_CASE("adjoint polynomial psi*_4 = (y^4 + 24)/sqrt(24)") {
    const Polynomial p = adjoint_polynomial(2, 1, 4);
    REQUIRE(p.coeffs.size() == 5);
    const double s = 1.0 / std::sqrt(24.0);
    CHECK(p.coeffs[0] == doctest::Approx(24 * s).epsilon(1e-14));
    CHECK(p.coeffs[1] == 0.0);
    CHECK(p.coeffs[2] == 0.0);
    CHECK(p.coeffs[3] == 0.0);
    CHECK(p.coeffs[4] == doctest::Approx(s).epsilon(1e-14));
    CHECK(p.degree() == 4);
  }

  TEST_CASE("m = 1 adjoint polynomials are Hermite polynomials") {
    // (y^2 - 2)/sqrt 2 for the heat kernel of variance 2
    const Polynomial p = adjoint_polynomial(1, 1, 2);
    CHECK(p(1.5) * std::sqrt(2.0) == doctest::Approx(1.5 * 1.5 - 2.0));
  }

  TEST_CASE("biorthogonality up to order 6") {
    const Eigen::MatrixXd G = gram_matrix(fixtures::table21(), 6);
    CHECK((G - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-6);
  }

  TEST_CASE("kappa vanishes for odd l by quadrature and by shortcut") {
    const KernelTable& t = fixtures::table21();
    for (int l : {1, 3, 5}) {
      const double p = bifurcation_exponent(2, 1, l).value();
      CHECK(std::abs(kappa(t, l, p, false)) <= 1e-8);
      CHECK(kappa(t, l, p, true) == 0.0);
    }
  }

  TEST_CASE("kappa_0 at p = 5 matches the independent quadrature") {
    const double k = kappa(fixtures::table21(), 0, 5.0);
    CHECK(k > 0);
    CHECK(std::abs(k - fixtures::kKappa0) <= 1e-10);
  }

  TEST_CASE("pitchfork coefficients match the independent quadrature") {
    const PitchforkCoefficients pc = pitchfork_coefficients(fixtures::table21());
    CHECK(std::abs(pc.mu / fixtures::kMu12 - 1.0) <= 1e-6);
    CHECK(std::abs(pc.nu / fixtures::kNu12 - 1.0) <= 1e-6);
    CHECK(pc.c_hat == doctest::Approx(1.0 / (24 * pc.mu * pc.nu)));
  }

  TEST_CASE("local branch amplitude solves its defining relation") {
    const BifurcationCoefficients bc = bifurcation_coefficients(fixtures::table21(), 0);
    REQUIRE(bc.c_hat.has_value());
    for (double p : {4.95, 5.02}) {
      const auto amp = local_branch_amplitude(bc, p);
      REQUIRE(amp.size() == 1);
      const double e = amp[0].eps;
      CHECK(std::pow(std::abs(e), p - 2) * e == doctest::Approx(*bc.c_hat * (p - 5.0)).epsilon(1e-13));
    }
  }

  TEST_CASE("generating system with one mode reproduces the amplitude law") {
    const KernelTable& t = fixtures::table21();
    const double s = 0.02, p = 5.0 + s;
    const double scale = generating_scale(ScaleConvention::Bifurcation, 2, 1, 0, s);
    const auto sols = solve_generating_system(t, ModelParams(2, 1, p), {0}, scale);
    const auto amp = local_branch_amplitude(bifurcation_coefficients(t, 0), p);
    bool found = false;
    for (const auto& g : sols) {
      if (!g.trivial && std::abs(g.eps[0] - amp[0].eps) <= 0.05 * std::abs(amp[0].eps)) found = true;
    }
    CHECK(found);
  }

  TEST_CASE("eigenfunctions follow the sign convention") {
    const KernelTable& t = fixtures::table21();
    CHECK(eigenfunction_eval(t, 1, 1.0) == doctest::Approx(-kernel_eval(t, 1.0, 1)));
    CHECK(eigenfunction_eval(t, 2, 1.0) == doctest::Approx(kernel_eval(t, 1.0, 2) / std::sqrt(2.0)));
    const SpectralPair sp = spectral_pair(t, 3);
    CHECK(sp.lambda == doctest::Approx(-0.75));
    CHECK(sp.multiplicity == 1);
  }
}
