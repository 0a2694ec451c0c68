#pragma once

#include "negsob/operators.hpp"

namespace negsob {

/// Per-level breakdown of the multilevel norm
/// sum_l || h_l^s (P'_l - P'_{l-1}) phi ||^2 with elementwise mesh-size
/// weights h_T^s.
struct MLNormReport {
  double s = 0.5;
  Variant variant = Variant::plain;
  std::vector<double> level_contributions;
  std::vector<long long> active_elements;
  double total = 0.0;
  double wall_seconds = 0.0;
};

/// Evaluates the multilevel norm of a piecewise constant. Input given on a
/// coarser level is handled by prolongation (differences above its level
/// vanish, so the sum is truncated there). Localized evaluation confines
/// each level's work to the refined neighborhoods.
MLNormReport multilevel_norm(const MeshHierarchy& h, const P0Fn& phi, double s, Variant variant,
                             bool localized = true);

/// Oswald-type baseline sum_l || h_l^s (Pi0_l - Pi0_{l-1}) phi ||^2.
/// Defined on uniform hierarchies only.
MLNormReport oswald_norm(const MeshHierarchy& h, const P0Fn& phi, double s);

/// Degree-p extension: multilevel norm of the elementwise-mean part plus
/// the weighted star energies h_T^{2s} ||phi_{T,j}||_T^2.
struct HigherOrderNormReport {
  MLNormReport mean_part;
  double star_part = 0.0;
  double total = 0.0;
};

HigherOrderNormReport higher_order_norm(const MeshHierarchy& h, const PpDiscFn& phi, double s, Variant variant,
                                        const StarBasis& basis);

}  // namespace negsob
