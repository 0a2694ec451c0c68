#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "negsob/common.hpp"

namespace negsob {

/// Row-major dense matrix. Plain storage, no expression templates; every
/// consumer in this project is a desk-scale oracle (n <= 4096 for
/// eigensolves, see kDenseEigCap).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static DenseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }
  std::span<double> row(int i) { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int i) const { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

  /// |A_ij - A_ji| <= tol * max(1, |A_ij|) for all i, j.
  bool is_symmetric(double tol = 1e-12) const;
  void symmetrize();

  double frobenius_norm() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline constexpr int kDenseEigCap = 4096;

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);
std::vector<double> matvec_transposed(const DenseMatrix& a, std::span<const double> x);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Compressed sparse row matrix. Column indices strictly increasing within
/// each row; row offsets non-decreasing (checked by validate()).
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<int> offsets, std::vector<int> indices, std::vector<double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<int>& offsets() const { return offsets_; }
  const std::vector<int>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> apply_transposed(std::span<const double> x) const;

 private:
  void validate() const;
  int rows_ = 0, cols_ = 0;
  std::vector<int> offsets_;
  std::vector<int> indices_;
  std::vector<double> values_;
};

/// Lower-triangular Cholesky factor A = L L^T.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(DenseMatrix lower) : l_(std::move(lower)) {}
  int dim() const { return l_.rows(); }
  const DenseMatrix& lower() const { return l_; }

  std::vector<double> solve(std::span<const double> b) const;
  /// Solves A X = B column by column; B given as dense (dim x k).
  DenseMatrix solve_many(const DenseMatrix& b) const;
  void solve_lower_inplace(std::span<double> x) const;  // L y = b
  void solve_upper_inplace(std::span<double> x) const;  // L^T x = y

 private:
  DenseMatrix l_;
};

/// Throws Error("<name> is not SPD ...") when a pivot is <= 0.
CholeskyFactor cholesky(const DenseMatrix& a, const std::string& name = "matrix");

std::vector<double> cholesky_solve(const DenseMatrix& a, std::span<const double> b, const std::string& name = "matrix");

struct SymEigResult {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column j pairs with values[j]
};

/// Householder tridiagonalization followed by implicit-shift QL.
/// n is capped at kDenseEigCap.
SymEigResult sym_eig(const DenseMatrix& a, const std::string& name = "matrix");

/// A Z = B Z diag(values), Z^T B Z = I, values ascending. Both inputs must
/// be SPD; Cholesky failure of either names the offending matrix.
SymEigResult generalized_sym_eig(const DenseMatrix& a, const DenseMatrix& b,
                                 const std::string& name_a = "A", const std::string& name_b = "B");

/// Eigenvalues only of a symmetric tridiagonal matrix (ascending).
std::vector<double> tridiag_eigenvalues(std::vector<double> diag, std::vector<double> off);

/// Symmetric positive definite operator known through its application.
class LinearOperator {
 public:
  using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

  LinearOperator() = default;
  LinearOperator(int dim, ApplyFn apply) : dim_(dim), apply_(std::move(apply)) {}

  static LinearOperator from_matrix(DenseMatrix a);
  static LinearOperator identity(int n);
  static LinearOperator scaled_identity(int n, double s);

  int dim() const { return dim_; }
  void apply(std::span<const double> x, std::span<double> y) const { apply_(x, y); }
  std::vector<double> operator()(std::span<const double> x) const;

 private:
  int dim_ = 0;
  ApplyFn apply_;
};

struct PcgResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
};

/// Preconditioned CG in the M-inner-product formulation. M applies an
/// approximate inverse of A. Terminates when ||b - A x|| <= rtol ||b||.
/// Breakdown (p^T A p <= 0 or r^T M r <= 0) throws naming the operator.
PcgResult pcg_solve(const LinearOperator& a, const LinearOperator& m, std::span<const double> b,
                    double rtol, int maxit);

struct ExtremeEigs {
  double min = 0.0;
  double max = 0.0;
  int iterations = 0;
};

/// Ritz estimates of the extreme eigenvalues of M A (both SPD). Lanczos runs
/// on the M-self-adjoint operator x -> A(Mx) with full reorthogonalization
/// in the M inner product; iteration cap 200.
ExtremeEigs lanczos_extreme_eigs(const LinearOperator& a, const LinearOperator& m, int iters,
                                 std::uint64_t seed = 0x5eed);

inline constexpr int kLanczosCap = 200;

/// Minimizes sum_i d_i c_i^2 subject to Phi c = x (Phi is dim x natoms,
/// natoms >= dim). Householder-QR based; used as the independent route for
/// the additive Schwarz norm. Throws when the columns of Phi fail to span.
std::vector<double> weighted_min_norm_solve(const DenseMatrix& phi, std::span<const double> d,
                                            std::span<const double> x);

}  // namespace negsob
