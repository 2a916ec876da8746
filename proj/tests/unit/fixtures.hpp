#pragma once

#include "polyheat/kernel.hpp"
#include "polyheat/profile.hpp"
#include "polyheat/spectral.hpp"

namespace fixtures {

// Frozen reference values from tests/oracles/compute_oracles.py.
inline constexpr double kF0 = 0.28851686930823484;          // Gamma(5/4)/pi
inline constexpr double kA0 = 0.47247039371057736;          // far-field roots of S'^3 = y/4
inline constexpr double kKappa0 = 0.0037739697943644118;     // int F^5
inline constexpr double kMu12 = 0.017857411676303322;
inline constexpr double kNu12 = 0.0013189520660855242;
inline constexpr double kF0AtP6 = 0.632559467846374;         // scipy collocation BVP, L = 32

// Shared tables are built once per test binary.
inline const polyheat::KernelTable& table21() {
  static const polyheat::KernelTable t =
      polyheat::build_kernel_table(polyheat::ModelParams::linear(2, 1), 48.0, 2001, 8);
  return t;
}

inline polyheat::Grid half32() { return polyheat::Grid::half_line(32.0, 2667); }

inline const polyheat::Profile& f0_p6() {
  static const polyheat::Profile p = [] {
    const polyheat::Grid g = half32();
    auto r = polyheat::solve_profile(polyheat::ModelParams(2, 1, 6.0), g, polyheat::Symmetry::Even,
                                     polyheat::eigenfunction_seed(table21(), g, 0, 2.0));
    return r.profile;
  }();
  return p;
}

}  // namespace fixtures
