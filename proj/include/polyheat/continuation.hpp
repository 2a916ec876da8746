#pragma once

#include <complex>
#include <string>
#include <vector>

#include "polyheat/grid.hpp"
#include "polyheat/kernel.hpp"
#include "polyheat/model.hpp"
#include "polyheat/profile.hpp"

namespace polyheat {

struct BranchPoint {
  double p = 0.0;
  double sup_norm = 0.0;
  double f_at_0 = 0.0;
  double mass = 0.0;
  double p_mass = 0.0;
  double residual = 0.0;                // max-norm ODE residual at acceptance
  double mass_identity_residual = 0.0;  // |p_mass + c_1 mass|
  double arclength = 0.0;               // cumulative, in the continuation metric
  std::string profile_ref;              // file reference, filled in by writers
};

enum class EndpointKind { Bifurcation, Fold, DomainLimit, Failure, Ambiguous, Open };
const char* to_string(EndpointKind k);
EndpointKind endpoint_kind_from_string(const std::string& s);

struct EndpointClass {
  EndpointKind kind = EndpointKind::Open;
  int l = -1;                         // bifurcation index when kind == Bifurcation
  double p_l = 0.0;
  double p_l_discrete = 0.0;          // bifurcation point of the discrete operator on the branch grid
  double exponent = 0.0;              // fitted d log(sup) / d log|p - p_l_discrete|
  double exponent_exact = 0.0;        // same fit against the exact p_l
  double predicted_exponent = 0.0;    // 1/(p_l-1) for kappa_l != 0, 1/(2(p_l-1)) otherwise
  std::vector<int> candidates;        // all l with |p_end - p_l| <= tol (ambiguity report)
  std::string note;
};

struct FoldRecord {
  int index = 0;   // branch point where the p-direction reverses
  double p_lo = 0.0, p_hi = 0.0;
  bool refined = false;
  std::string warning;
};

enum class BranchEnd { Start, End };

struct ContinuationOptions {
  double ds = 0.01;        // initial step in the continuation metric
  double ds_min = 1e-4;
  double ds_max = 0.05;
  double grow = 1.3;       // step growth factor after grow_after successes
  int grow_after = 4;
  double p_min = 1.05;
  double p_max = 200.0;
  int max_points = 20000;
  double log_p_above = 10.0;  // parameter q = p below, p* (1 + ln(p/p*)) above
  double amp_stop = 1e-3;     // stop once sup_norm falls below this
  double endpoint_tol = 0.01;
  int corrector_max_iterations = 12;
  SolverOptions solver{};
  bool store_states = true;
  void validate() const;
};

/// Traced p-branch. states[i] holds the nodal values of points[i] when stored.
struct Branch {
  int m = 2, N = 1;
  Symmetry symmetry = Symmetry::Even;
  Grid grid;
  std::vector<BranchPoint> points;
  std::vector<std::vector<double>> states;
  std::vector<FoldRecord> folds;
  EndpointClass start, end;
  std::string termination;
  std::vector<double> failure_state;  // last corrector iterate when the trace ends in failure
};

/// Pseudo-arclength continuation with a secant predictor and a bordered
/// Newton corrector. direction = +1 traces towards increasing p initially.
Branch continue_branch(const Profile& start, int direction, const ContinuationOptions& opts = {});

/// Indices where the p-component of the branch tangent changes sign.
std::vector<FoldRecord> detect_fold(const Branch& branch);

/// Shrinks the p-bracket of a detected fold by bisection along the branch.
FoldRecord refine_fold(const Branch& branch, const FoldRecord& fold, double width_target = 1e-4,
                       const ContinuationOptions& opts = {});

EndpointClass classify_endpoint(const Branch& branch, BranchEnd which, double endpoint_tol = 0.01);

struct EigenEstimate {
  std::complex<double> value;
  double residual = 0.0;  // ||A x - lambda x|| / ||x||
};

/// k eigenvalues of the discretized A'(f) = B + c_1 + g'(f) closest to shift,
/// by shift-invert Arnoldi. The list is sorted by distance to the shift.
std::vector<EigenEstimate> linearization_spectrum(const Profile& profile, int k, double shift = 0.0);

/// Value of p at which the discrete linearization about f = 0 on this grid
/// has the eigenvalue of mode l at zero. Differs from p_l by O(h^2).
double discrete_bifurcation_point(int m, int N, const Grid& grid, int l);

/// Profile on the branch bifurcating from f = 0 at p_l, obtained at p_l +- 0.01
/// from the local amplitude law (or from the centre-manifold reduction for the
/// pitchfork at p_1 = 3) and continued to target.p() when it lies further away.
Profile profile_from_bifurcation(const KernelTable& table, const ModelParams& target, const Grid& grid, int l,
                                 const ContinuationOptions& opts = {});

/// Convenience: profile object for a stored branch point.
Profile branch_profile(const Branch& branch, int index);

}  // namespace polyheat
