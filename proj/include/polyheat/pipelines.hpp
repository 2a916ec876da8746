#pragma once

#include <string>
#include <vector>

#include "polyheat/continuation.hpp"
#include "polyheat/io.hpp"
#include "polyheat/kernel.hpp"

namespace polyheat {

/// Kernel table for (m, N) with the table settings of a run configuration.
KernelTable pipeline_kernel(const RunConfig& cfg, int m, int N);

/// Even branch of f_0 traced upwards from p = 5.01 to cfg.p_max.
Branch f0_upper_branch(const RunConfig& cfg, const KernelTable& table);

/// Even branch traced downwards from p = 4.99 until it lands on the axis.
Branch f0_lower_branch(const RunConfig& cfg, const KernelTable& table);

/// Even branch leaving p_l (l even, l >= 2) downwards, seeded at p_l - 0.01.
Branch even_branch_below(const RunConfig& cfg, const KernelTable& table, int l);

/// Dipole branch (odd seed) leaving p_1 = 3 on a full-line grid, traced
/// through its turning point until it lands on the axis again.
Branch dipole_branch(const RunConfig& cfg, const KernelTable& table);

/// Index range [first, last] of a branch between consecutive turning points.
struct Leg {
  int first = 0;
  int last = 0;
};
/// Splits a branch at its detected folds.
std::vector<Leg> branch_legs(const Branch& branch);

/// Converged profile at exactly p on one leg of a stored branch. The seed is
/// the linear interpolation of the two bracketing branch states.
Profile profile_on_leg(const Branch& branch, const Leg& leg, double p, const SolverOptions& opts = {});

/// Samples of several profiles on a common y grid, one column per profile.
CsvTable profiles_table(const std::vector<Profile>& profiles, const std::vector<std::string>& names);

/// Subset of a branch as (p, sup_norm, f_at_0, mass) rows.
CsvTable branch_table(const Branch& branch, const Leg& leg);

struct FigureOutput {
  std::string id;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> notes;
};

/// Regenerates the data behind one figure (fig1 .. fig15) and writes CSV files
/// named <id>_*.csv into dir.
FigureOutput reproduce_figure(const std::string& id, const RunConfig& cfg, const std::filesystem::path& dir);

/// Known figure identifiers with a one-line description each.
std::vector<std::pair<std::string, std::string>> figure_catalogue();

}  // namespace polyheat
