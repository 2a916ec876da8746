#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "polyheat/error.hpp"
#include "polyheat/kernel.hpp"

using namespace polyheat;

TEST_SUITE("kernel") {
  TEST_CASE("mass and central value of the m = 2 kernel") {
    const KernelTable& t = fixtures::table21();
    CHECK(std::abs(t.mass() - 1.0) <= 1e-8);
    CHECK(std::abs(t.column(0)[0] - fixtures::kF0) <= 1e-9);
    CHECK(std::abs(kernel_quadrature(2, 1, 0.0, 0) - fixtures::kF0) <= 1e-12);
    CHECK(std::abs(fundamental_solution_eval(t, 0.0, 1.0) - fixtures::kF0) <= 1e-9);
  }

  TEST_CASE("m = 1 reproduces the Gaussian") {
    const KernelTable t = build_kernel_table(ModelParams::linear(1, 1), default_kernel_length(1, 1), 1201, 2);
    double worst = 0.0;
    for (int i = 0; i < t.nodes(); ++i) {
      const double y = t.y(i);
      worst = std::max(worst, std::abs(t.column(0)[i] - std::exp(-y * y / 4) / std::sqrt(4 * std::numbers::pi)));
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("table derivatives agree with direct quadrature") {
    const KernelTable& t = fixtures::table21();
    for (int k : {1, 3, 6}) {
      for (double y : {0.7, 3.3, 9.1}) {
        CHECK(std::abs(kernel_eval(t, y, k) - kernel_quadrature(2, 1, y, k)) <= 1e-9);
      }
    }
  }

  TEST_CASE("parity of derivatives under y -> -y") {
    const KernelTable& t = fixtures::table21();
    for (int k = 0; k <= 4; ++k) {
      const double s = k % 2 == 0 ? 1.0 : -1.0;
      CHECK(kernel_eval(t, -2.37, k) == s * kernel_eval(t, 2.37, k));
    }
  }

  TEST_CASE("decay fit exponent is 4/3") {
    const KernelTable& t = fixtures::table21();
    REQUIRE(t.has_decay_fit());
    CHECK(std::abs(t.decay().alpha - 4.0 / 3.0) <= 0.05);
    // the linearized far field fixes the envelope rate at a_0 / 2
    CHECK(std::abs(t.decay().d - fixtures::kA0 / 2) <= 0.1 * fixtures::kA0 / 2);
  }

  TEST_CASE("ODE residual on a spacing of 0.004") {
    const KernelTable t = build_kernel_table(ModelParams::linear(2, 1), 16.0, 4001, 4);
    CHECK(t.ode_residual() <= 1e-6);
  }

  TEST_CASE("radial kernel keeps unit mass") {
    const KernelTable t = build_kernel_table(ModelParams::linear(2, 3), default_kernel_length(2, 3), 801, 0);
    CHECK(std::abs(t.mass() - 1.0) <= 1e-7);
  }

  TEST_CASE("bad table requests") {
    CHECK_THROWS_AS(build_kernel_table(ModelParams::linear(2, 1), 16.0, 10, 2), DomainError);
    CHECK_THROWS_AS(build_kernel_table(ModelParams::linear(2, 5), 16.0, 801, 2), UnsupportedError);
    CHECK_THROWS(fixtures::table21().column(9));
  }
}
