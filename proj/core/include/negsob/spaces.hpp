#pragma once

#include <array>
#include <span>
#include <vector>

#include "negsob/linalg.hpp"
#include "negsob/mesh.hpp"

namespace negsob {

/// Piecewise constant function on level `level`: one coefficient per element.
struct P0Fn {
  int level = 0;
  std::vector<double> coeff;
};

/// Discontinuous piecewise linear function: three values per element, in the
/// element's local vertex order.
struct P1DiscFn {
  int level = 0;
  std::vector<double> values;  // size 3 * #elements
};

/// Facet function psi_E = |E|/|T+| chi_{T+} - |E|/|T-| chi_{T-}; the
/// divergence of the lowest-order Raviart-Thomas basis field of E. On
/// boundary facets the minus part is absent.
struct HaarAtom {
  int level = -1;
  int facet = -1;
  int plus = -1, minus = -1;  // level-local element ids
  double weight_plus = 0.0;   // |E| / |T+|
  double weight_minus = 0.0;  // -|E| / |T-|, 0 on the boundary
  double facet_length = 0.0;  // h_E
};

HaarAtom haar_atom(const MeshHierarchy& h, int level, int facet);
P0Fn haar_fn(const MeshHierarchy& h, int level, int facet);
/// ||psi||_{L2}^2 = w+^2 |T+| + w-^2 |T-|.
double haar_l2_norm_sq(const MeshHierarchy& h, const HaarAtom& atom);

/// Reduced facet sets: level 0 keeps every facet; a later level keeps the
/// facets that are new or whose Haar support strictly shrank (an adjacent
/// element was bisected). Also records, for every facet of every level, the
/// latest level at which it entered the reduced set.
struct TildeFacetSets {
  std::vector<std::vector<int>> reduced;           // facet ids per level
  std::vector<std::vector<int>> reduced_interior;  // interior subset
  std::vector<std::vector<char>> in_reduced;       // [level][facet id]
  std::vector<std::vector<int>> assoc_level;       // [level][facet id] -> level k
  std::vector<std::vector<int>> assoc_facet;       // [level][facet id] -> facet id at k
  long long total_reduced = 0;
  long long total_reduced_interior = 0;
};

TildeFacetSets tilde_facet_sets(const MeshHierarchy& h);

/// Injection P0(l) -> P0(l+1): each child row has a single unit entry at its
/// father's column.
SparseMatrix transfer_matrix(const MeshHierarchy& h, int from_level);

/// Pointwise-identical representation on a finer level.
P0Fn prolong_p0(const MeshHierarchy& h, const P0Fn& f, int to_level);

/// Transpose of the injection chain: sums dual coefficients over
/// descendants. Input indexed by level `from_level`, output by `to_level`.
std::vector<double> restrict_dual_p0(const MeshHierarchy& h, std::span<const double> dual, int from_level,
                                     int to_level);

/// Exact integrals; functions on different levels are compared on the finer
/// common level.
double l2_inner_p0(const MeshHierarchy& h, const P0Fn& a, const P0Fn& b);
double l2_norm_sq_p0(const MeshHierarchy& h, const P0Fn& a);

/// Element mass |T|/12 (1 + delta_ij) applied pairwise; same level only.
double l2_inner_p1disc(const MeshHierarchy& h, const P1DiscFn& a, const P1DiscFn& b);
double l2_norm_sq_p1disc(const MeshHierarchy& h, const P1DiscFn& a);

P1DiscFn p0_as_p1disc(const P0Fn& f);
/// Elementwise mean (the same-level L2 projection onto constants).
P0Fn p1disc_mean(const P1DiscFn& f);
/// Exact restriction of element-linear functions to descendants.
P1DiscFn lift_p1disc(const MeshHierarchy& h, const P1DiscFn& f, int to_level);

/// Barycentric coordinates of a point with respect to a forest element.
std::array<double, 3> barycentric(const MeshHierarchy& h, int tree_id, double px, double py);

/// Cubic-moment table: one upward sweep over the bisection forest computes
/// m_{T,i} = int_T phi N_i^T for the ten degree-3 Lagrange functions of
/// every element T of every level at once (exact for any fine-level P0
/// input, cost and storage O(#forest)). Linear-hat and bubble pairings at
/// any level come out as fixed reference combinations of the moments.
class MomentTable {
 public:
  MomentTable(const MeshHierarchy& h, const P0Fn& fine);

  int source_level() const { return source_level_; }
  std::span<const double, 10> element(int tree_id) const {
    return std::span<const double, 10>(m_.data() + static_cast<std::size_t>(tree_id) * 10, 10);
  }
  /// (int_T phi lambda_0, int_T phi lambda_1, int_T phi lambda_2).
  std::array<double, 3> linear_moments(int tree_id) const;
  /// int_T phi lambda_0 lambda_1 lambda_2.
  double bubble_moment(int tree_id) const;
  /// int_T phi.
  double mean_moment(int tree_id) const;

 private:
  const MeshHierarchy* h_;
  int source_level_;
  std::vector<double> m_;  // 10 per tree element
};

/// Reference data for the degree-3 Lagrange basis on the unit triangle.
namespace p3ref {
inline constexpr int kNodes = 10;
/// Barycentric node multi-indices (i,j,k)/3 with i+j+k=3.
const std::array<std::array<int, 3>, kNodes>& node_multi_indices();
/// Values of all ten basis functions at reference point (x, y).
std::array<double, kNodes> eval_basis(double x, double y);
/// Integrals of the basis over the reference triangle (area 1/2).
const std::array<double, kNodes>& basis_integrals();
}  // namespace p3ref

/// Orthonormal zero-mean polynomial basis on the reference triangle spanning
/// the complement of the constants in P^p, mapped per element by the affine
/// pullback (so each mapped function has squared norm 2|T| and zero mean).
struct StarBasis {
  int degree = 1;
  int dim = 0;  // d_p - 1
  // star function coefficients in the monomial basis 1,x,y[,x^2,xy,y^2]
  std::vector<std::vector<double>> mono_coeffs;
  // Lagrange nodes of degree p on the reference triangle and basis values there
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::vector<double>> node_values;  // [star fn][node]
  DenseMatrix node_to_mono;                      // interpolation: nodal values -> monomial coeffs
  std::vector<double> mono_integrals;            // int_ref of each monomial
  DenseMatrix mono_gram;                         // int_ref m_i m_j
};

StarBasis star_basis_build(int degree);

/// Degree-p discontinuous function, nodal values per element (p=1: the three
/// vertices; p=2: vertices then edge midpoints 01, 12, 20).
struct PpDiscFn {
  int level = 0;
  int degree = 1;
  std::vector<double> values;
};

struct StarSplitResult {
  P0Fn mean;
  std::vector<double> star_coeff;  // (d_p - 1) per element
};

/// phi = mean + sum_j c_{T,j} chi_{T,j}, exactly.
StarSplitResult star_split(const MeshHierarchy& h, const PpDiscFn& f, const StarBasis& basis);
PpDiscFn star_reconstruct(const MeshHierarchy& h, const StarSplitResult& split, const StarBasis& basis);

}  // namespace negsob
