#pragma once

#include <memory>
#include <span>

#include "negsob/linalg.hpp"
#include "negsob/operators.hpp"
#include "negsob/spaces.hpp"

namespace negsob {

/// Dense oracle Gram matrices are capped at this many P0 degrees of
/// freedom; larger studies must stay matrix-free.
inline constexpr int kOracleGramCap = 3000;
/// Guard for the companion conforming-P1 solve.
inline constexpr int kOracleFemCap = 12000;

/// Discrete dual-norm solver: a bubble-enriched conforming P1 form on a
/// uniformly refined copy of the hierarchy (depth extra levels). plain:
/// Dirichlet stiffness, dual of the H^1_0 seminorm; tilde: stiffness + mass
/// with natural boundary, dual of the full H^1 norm. The test space is
/// S^1 + elementwise cubic bubbles: without the bubbles the pairing with
/// the piecewise constants is rank deficient (a sibling-alternating
/// checkerboard annihilates every interior hat of the refined mesh). The
/// bubbles are condensed out, so the factored system stays vertex sized.
class DualNormSolver {
 public:
  DualNormSolver(const MeshHierarchy& h, Variant variant, int depth);

  int source_level() const { return src_level_; }
  int oracle_level() const { return oracle_level_; }
  int fem_dofs() const { return ndof_; }
  Variant variant() const { return variant_; }

  /// ||phi||^2 in the discrete dual norm, phi given by P0(T_L) coefficients.
  double dual_norm_sq(std::span<const double> coeff) const;

  /// W = B^T A^{-1} B over all P0(T_L) basis functions (dense, symmetric).
  DenseMatrix gram() const;

 private:
  MeshHierarchy oh_;  // extended copy
  int src_level_ = 0, oracle_level_ = 0;
  Variant variant_ = Variant::plain;
  int ndof_ = 0;
  std::vector<int> dof_of_vertex_;
  std::unique_ptr<CholeskyFactor> factor_;  // condensed vertex block
  std::vector<std::vector<std::pair<int, double>>> elem_loads_;  // per source element
  // per oracle element: source element, condensed-bubble data
  std::vector<int> src_of_;
  std::vector<double> bubble_diag_;          // A_bb per oracle element
  std::vector<double> bubble_load_;          // int_K eta_b = |K|/60
  std::vector<std::array<int, 3>> bubble_dofs_;     // vertex dofs (-1 constrained)
  std::vector<std::array<double, 3>> bubble_coupling_;  // A_pb per oracle element
};

/// W_ij = b_i^T A^{-1} b_j on the depth-(M-L) refined companion mesh.
DenseMatrix hminus1_gram(const MeshHierarchy& h, Variant variant, int depth);

/// Dense spectral oracle for the interpolation norms between the discrete
/// dual norm (s = 1) and L2 (s = 0): caches the eigenpairs of
/// Mass z = lambda W z with Z^T W Z = I, so that
/// ||x||_{-s}^2 = sum_i lambda_i^{1-s} (z_i^T W x)^2.
class NormOracle {
 public:
  NormOracle(const MeshHierarchy& h, Variant variant, int depth = 1);

  const MeshHierarchy& hierarchy() const { return *h_; }
  Variant variant() const { return variant_; }
  int fine_level() const { return fine_level_; }
  int dim() const { return static_cast<int>(eig_.values.size()); }

  const DenseMatrix& gram_w() const { return w_; }
  const DenseMatrix& mass() const { return mass_; }
  const std::vector<double>& eigenvalues() const { return eig_.values; }
  const DenseMatrix& eigenvectors() const { return eig_.vectors; }

  double interp_norm_sq(std::span<const double> coeff, double s) const;
  double interp_norm_sq(const P0Fn& phi, double s) const;  // prolongs coarser input
  double interp_norm(const P0Fn& phi, double s) const;

  /// W-orthogonal projection onto the prolonged coarse space.
  P0Fn project_dual(const P0Fn& phi, int target_level) const;

  double w_norm_sq(std::span<const double> coeff) const;
  double l2_norm_sq(std::span<const double> coeff) const;

 private:
  const MeshHierarchy* h_;
  Variant variant_;
  int fine_level_;
  DenseMatrix w_, mass_;
  SymEigResult eig_;
  DenseMatrix ztw_;  // cached Z^T W when the dimension allows
};

/// Minimal-L2-norm Raviart-Thomas lift on a submesh: div sigma = rhs with
/// zero normal trace on the clamped facets. Realizes the commuting-lift
/// construction behind the local Neumann problems.
struct MixedLiftResult {
  int level = 0;
  std::vector<int> submesh;        // level-local element ids (sorted)
  std::vector<int> dof_facets;     // facet ids carrying coefficients
  std::vector<double> coeff;       // RT0 coefficient per dof facet
  std::vector<double> divergence;  // per submesh element (same order as submesh)
  double sigma_norm = 0.0;         // ||sigma||_{L2}
  double div_residual = 0.0;       // max |div - rhs| / max(1, max|rhs|)
};

MixedLiftResult mixed_lift(const MeshHierarchy& h, int level, const std::vector<int>& submesh,
                           std::span<const double> rhs, const std::vector<int>& clamped_facets);

}  // namespace negsob
