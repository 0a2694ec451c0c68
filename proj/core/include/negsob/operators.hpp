#pragma once

#include "negsob/spaces.hpp"

namespace negsob {

/// Selects the boundary treatment: `plain` builds the Scott-Zhang dual sum
/// over interior vertices only (H^-1 scale), `tilde` over all vertices
/// (the H~^-1 scale).
enum class Variant { plain, tilde };

inline const char* variant_name(Variant v) { return v == Variant::plain ? "plain" : "tilde"; }
Variant parse_variant(const std::string& s);

/// Area-weighted averaging down to `target_level` (the L2-orthogonal
/// projection onto the coarser piecewise constants).
P0Fn l2_project_p0(const MeshHierarchy& h, const P0Fn& f, int target_level);

/// Dual-node representation phi_z = (alpha eta_z + beta) / |Omega(z)|; the
/// 2D constants. Guarded by a one-time self-test inverting the reference
/// P1 mass matrix (verify_dual_node_constants).
inline constexpr double kDualNodeAlpha = 12.0;
inline constexpr double kDualNodeBeta = -3.0;
void verify_dual_node_constants();

/// Scott-Zhang adjoint J'_l phi = sum_z <phi, eta_z> phi_z at level l of the
/// moment table's source function.
P1DiscFn sz_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant);
P1DiscFn sz_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant);

/// Bubble adjoint: elementwise <phi, eta_b>_T / <eta_b, 1>_T with
/// <eta_b, 1>_T = |T|/60.
P0Fn bubble_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt);
P0Fn bubble_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi);

/// Quasi-projection adjoint P'_l = J'_l + (1 - J'_l) B'_l; fixes piecewise
/// constants of level l exactly.
P1DiscFn p_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant);
P1DiscFn p_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant);

/// Q_l = Pi^0_l P'_l (tilde: with the all-vertex Scott-Zhang sum).
P0Fn q_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant);
P0Fn q_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant);

/// (P'_l - P'_{l-1}) phi represented on level l (coarse part lifted through
/// the child map), with the active-element mask. When localized, work is
/// confined to the order-2 patch of the elements created at level l; the
/// output is structurally zero outside.
struct MlDifference {
  P1DiscFn diff;
  std::vector<char> active;  // per level-l element
  long long active_count = 0;
};

MlDifference ml_difference(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant,
                           bool localized = true);

}  // namespace negsob
