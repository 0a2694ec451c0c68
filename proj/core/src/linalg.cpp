#include "negsob/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace negsob {

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j) {
      double aij = (*this)(i, j), aji = (*this)(j, i);
      if (std::abs(aij - aji) > tol * std::max(1.0, std::abs(aij))) return false;
    }
  return true;
}

void DenseMatrix::symmetrize() {
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j) {
      double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
}

double DenseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  require(static_cast<int>(x.size()) == a.cols(), "matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double* row = a.data() + static_cast<std::size_t>(i) * a.cols();
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  require(static_cast<int>(x.size()) == a.rows(), "matvec_transposed: dimension mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double* row = a.data() + static_cast<std::size_t>(i) * a.cols();
    double xi = x[i];
    for (int j = 0; j < a.cols(); ++j) y[j] += xi * row[j];
  }
  return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* ci = c.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* bp = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<int> offsets, std::vector<int> indices,
                           std::vector<double> values)
    : rows_(rows), cols_(cols), offsets_(std::move(offsets)), indices_(std::move(indices)), values_(std::move(values)) {
  validate();
}

void SparseMatrix::validate() const {
  require(static_cast<int>(offsets_.size()) == rows_ + 1, "SparseMatrix: bad offsets size");
  require(offsets_.front() == 0 && offsets_.back() == static_cast<int>(indices_.size()),
          "SparseMatrix: bad offsets range");
  require(indices_.size() == values_.size(), "SparseMatrix: indices/values size mismatch");
  for (int i = 0; i < rows_; ++i) {
    require(offsets_[i] <= offsets_[i + 1], "SparseMatrix: decreasing offsets");
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      require(indices_[k] >= 0 && indices_[k] < cols_, "SparseMatrix: column index out of range");
      if (k > offsets_[i]) require(indices_[k] > indices_[k - 1], "SparseMatrix: column indices not strictly increasing");
    }
  }
}

std::vector<double> SparseMatrix::apply(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == cols_, "SparseMatrix::apply: dimension mismatch");
  std::vector<double> y(rows_, 0.0);
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[indices_[k]];
    y[i] = s;
  }
  return y;
}

std::vector<double> SparseMatrix::apply_transposed(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == rows_, "SparseMatrix::apply_transposed: dimension mismatch");
  std::vector<double> y(cols_, 0.0);
  for (int i = 0; i < rows_; ++i)
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) y[indices_[k]] += values_[k] * x[i];
  return y;
}

CholeskyFactor cholesky(const DenseMatrix& a, const std::string& name) {
  require(a.rows() == a.cols(), "cholesky: " + name + " is not square");
  const int n = a.rows();
  DenseMatrix l = a;
  std::vector<double> col(n);
  for (int k = 0; k < n; ++k) {
    double pivot = l(k, k);
    if (!(pivot > 0.0)) fail("cholesky: " + name + " is not SPD (pivot " + std::to_string(pivot) + " at index " + std::to_string(k) + ")");
    double lkk = std::sqrt(pivot);
    l(k, k) = lkk;
    for (int i = k + 1; i < n; ++i) {
      l(i, k) /= lkk;
      col[i] = l(i, k);
    }
#pragma omp parallel for schedule(dynamic, 32)
    for (int i = k + 1; i < n; ++i) {
      double lik = col[i];
      double* row = l.data() + static_cast<std::size_t>(i) * n;
      for (int j = k + 1; j <= i; ++j) row[j] -= lik * col[j];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) l(i, j) = 0.0;
  return CholeskyFactor(std::move(l));
}

void CholeskyFactor::solve_lower_inplace(std::span<double> x) const {
  const int n = dim();
  for (int i = 0; i < n; ++i) {
    const double* row = l_.data() + static_cast<std::size_t>(i) * n;
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= row[j] * x[j];
    x[i] = s / row[i];
  }
}

void CholeskyFactor::solve_upper_inplace(std::span<double> x) const {
  const int n = dim();
  for (int j = n - 1; j >= 0; --j) {
    const double* row = l_.data() + static_cast<std::size_t>(j) * n;
    x[j] /= row[j];
    double xj = x[j];
    for (int i = 0; i < j; ++i) x[i] -= row[i] * xj;
  }
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  require(static_cast<int>(b.size()) == dim(), "CholeskyFactor::solve: dimension mismatch");
  std::vector<double> x(b.begin(), b.end());
  solve_lower_inplace(x);
  solve_upper_inplace(x);
  return x;
}

DenseMatrix CholeskyFactor::solve_many(const DenseMatrix& b) const {
  require(b.rows() == dim(), "CholeskyFactor::solve_many: dimension mismatch");
  const int n = dim(), k = b.cols();
  DenseMatrix x(n, k);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < k; ++j) {
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) c[i] = b(i, j);
    solve_lower_inplace(c);
    solve_upper_inplace(c);
    for (int i = 0; i < n; ++i) x(i, j) = c[i];
  }
  return x;
}

std::vector<double> cholesky_solve(const DenseMatrix& a, std::span<const double> b, const std::string& name) {
  return cholesky(a, name).solve(b);
}

namespace {

// Householder reduction to tridiagonal form with accumulated transformations
// (EISPACK tred2). On return z holds Q with Q^T A Q = tridiag(d, e).
void tred2(DenseMatrix& z, std::vector<double>& d, std::vector<double>& e) {
  const int n = z.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (int i = n - 1; i > 0; --i) {
    int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k <= l; ++k) scale += std::abs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (int k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          double* rowj = z.data() + static_cast<std::size_t>(j) * n;
          const double* rowi = z.data() + static_cast<std::size_t>(i) * n;
          for (int k = 0; k <= j; ++k) rowj[k] -= f * e[k] + g * rowi[k];
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    int l = i - 1;
    if (d[i] != 0.0) {
      for (int j = 0; j <= l; ++j) {
        double g = 0.0;
        for (int k = 0; k <= l; ++k) g += z(i, k) * z(k, j);
        for (int k = 0; k <= l; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (int j = 0; j <= l; ++j) z(j, i) = z(i, j) = 0.0;
  }
}

// Implicit-shift QL on tridiag(d, e); z accumulates eigenvectors when
// non-null (EISPACK tql2/tql1).
void tql2(std::vector<double>& d, std::vector<double>& e, DenseMatrix* z, const std::string& name) {
  const int n = static_cast<int>(d.size());
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (iter++ == 60) fail("sym_eig: QL iteration failed to converge for " + name);
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (z != nullptr) {
            const int nn = z->rows();
            double* zd = z->data();
#pragma omp parallel for schedule(static) if (nn > 512)
            for (int k = 0; k < nn; ++k) {
              double* rowk = zd + static_cast<std::size_t>(k) * nn;
              double fk = rowk[i + 1];
              rowk[i + 1] = s * rowk[i] + c * fk;
              rowk[i] = c * rowk[i] - s * fk;
            }
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

void sort_eigs_ascending(std::vector<double>& d, DenseMatrix* z) {
  const int n = static_cast<int>(d.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return d[a] < d[b]; });
  std::vector<double> ds(n);
  for (int i = 0; i < n; ++i) ds[i] = d[perm[i]];
  d = std::move(ds);
  if (z != nullptr) {
    DenseMatrix zs(z->rows(), z->cols());
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < z->rows(); ++i) zs(i, j) = (*z)(i, perm[j]);
    *z = std::move(zs);
  }
}

// Solves L X = B in place over all columns (L lower triangular, row-major).
void forward_solve_matrix(const DenseMatrix& l, DenseMatrix& b) {
  const int n = l.rows(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* li = l.data() + static_cast<std::size_t>(i) * n;
    double* bi = b.data() + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < i; ++j) {
      double lij = li[j];
      if (lij == 0.0) continue;
      const double* bj = b.data() + static_cast<std::size_t>(j) * m;
#pragma omp parallel for schedule(static) if (m > 512)
      for (int k = 0; k < m; ++k) bi[k] -= lij * bj[k];
    }
    double inv = 1.0 / li[i];
    for (int k = 0; k < m; ++k) bi[k] *= inv;
  }
}

// Solves L^T X = B in place over all columns.
void backward_solve_matrix(const DenseMatrix& l, DenseMatrix& b) {
  const int n = l.rows(), m = b.cols();
  for (int j = n - 1; j >= 0; --j) {
    const double* lj = l.data() + static_cast<std::size_t>(j) * n;
    double* bj = b.data() + static_cast<std::size_t>(j) * m;
    double inv = 1.0 / lj[j];
    for (int k = 0; k < m; ++k) bj[k] *= inv;
    for (int i = 0; i < j; ++i) {
      double lji = lj[i];
      if (lji == 0.0) continue;
      double* bi = b.data() + static_cast<std::size_t>(i) * m;
#pragma omp parallel for schedule(static) if (m > 512)
      for (int k = 0; k < m; ++k) bi[k] -= lji * bj[k];
    }
  }
}

}  // namespace

SymEigResult sym_eig(const DenseMatrix& a, const std::string& name) {
  require(a.rows() == a.cols(), "sym_eig: " + name + " is not square");
  require(a.rows() <= kDenseEigCap, "sym_eig: " + name + " exceeds the dense cap of " + std::to_string(kDenseEigCap));
  require(a.is_symmetric(1e-10), "sym_eig: " + name + " is not symmetric");
  SymEigResult res;
  res.vectors = a;
  std::vector<double> e;
  tred2(res.vectors, res.values, e);
  tql2(res.values, e, &res.vectors, name);
  sort_eigs_ascending(res.values, &res.vectors);
  return res;
}

SymEigResult generalized_sym_eig(const DenseMatrix& a, const DenseMatrix& b, const std::string& name_a,
                                 const std::string& name_b) {
  require(a.rows() == a.cols() && b.rows() == b.cols() && a.rows() == b.rows(),
          "generalized_sym_eig: dimension mismatch between " + name_a + " and " + name_b);
  require(a.is_symmetric(1e-10), "generalized_sym_eig: " + name_a + " is not symmetric");
  require(b.is_symmetric(1e-10), "generalized_sym_eig: " + name_b + " is not symmetric");
  CholeskyFactor lb = cholesky(b, name_b);
  // C = L^{-1} A L^{-T} via two triangular sweeps.
  DenseMatrix c = a;
  forward_solve_matrix(lb.lower(), c);
  c = transpose(c);
  forward_solve_matrix(lb.lower(), c);
  c.symmetrize();
  SymEigResult eig = sym_eig(c, name_a + "/" + name_b + " pencil");
  backward_solve_matrix(lb.lower(), eig.vectors);
  return eig;
}

std::vector<double> tridiag_eigenvalues(std::vector<double> diag, std::vector<double> off) {
  require(off.size() == diag.size(), "tridiag_eigenvalues: off-diagonal must be padded to size n (off[0] unused)");
  if (diag.empty()) return {};
  tql2(diag, off, nullptr, "tridiagonal");
  std::sort(diag.begin(), diag.end());
  return diag;
}

LinearOperator LinearOperator::from_matrix(DenseMatrix a) {
  auto m = std::make_shared<DenseMatrix>(std::move(a));
  int n = m->rows();
  return LinearOperator(n, [m](std::span<const double> x, std::span<double> y) {
    auto r = matvec(*m, x);
    std::copy(r.begin(), r.end(), y.begin());
  });
}

LinearOperator LinearOperator::identity(int n) { return scaled_identity(n, 1.0); }

LinearOperator LinearOperator::scaled_identity(int n, double s) {
  return LinearOperator(n, [s](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = s * x[i];
  });
}

std::vector<double> LinearOperator::operator()(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == dim_, "LinearOperator: dimension mismatch");
  std::vector<double> y(dim_, 0.0);
  apply_(x, y);
  return y;
}

PcgResult pcg_solve(const LinearOperator& a, const LinearOperator& m, std::span<const double> b, double rtol,
                    int maxit) {
  const int n = a.dim();
  require(static_cast<int>(b.size()) == n && m.dim() == n, "pcg_solve: dimension mismatch");
  PcgResult res;
  res.x.assign(n, 0.0);
  double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z = m(r);
  std::vector<double> p = z;
  std::vector<double> q(n);
  double rz = dot(r, z);
  if (!(rz > 0.0)) fail("pcg_solve: preconditioner is not SPD (r^T M r = " + std::to_string(rz) + ")");
  for (int k = 1; k <= maxit; ++k) {
    a.apply(p, q);
    double pq = dot(p, q);
    if (!(pq > 0.0)) fail("pcg_solve: system operator is not SPD (p^T A p = " + std::to_string(pq) + ")");
    double alpha = rz / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    res.iterations = k;
    res.relative_residual = norm2(r) / bnorm;
    if (res.relative_residual <= rtol) {
      res.converged = true;
      return res;
    }
    z = m(r);
    double rz_next = dot(r, z);
    if (!(rz_next > 0.0)) fail("pcg_solve: preconditioner is not SPD (r^T M r = " + std::to_string(rz_next) + ")");
    double beta = rz_next / rz;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rz = rz_next;
  }
  res.converged = false;
  return res;
}

ExtremeEigs lanczos_extreme_eigs(const LinearOperator& a, const LinearOperator& m, int iters, std::uint64_t seed) {
  const int n = a.dim();
  require(m.dim() == n, "lanczos_extreme_eigs: dimension mismatch");
  iters = std::min(iters, std::min(n, kLanczosCap));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Lanczos on x -> A(Mx), self-adjoint in the M inner product. Basis vectors
  // are kept M-orthonormal by full reorthogonalization each step.
  std::vector<std::vector<double>> v;   // basis
  std::vector<std::vector<double>> mv;  // M * basis
  std::vector<double> alpha, beta;

  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = gauss(rng);
  std::vector<double> mw = m(w);
  double nrm = std::sqrt(std::max(dot(w, mw), 0.0));
  require(nrm > 0.0, "lanczos_extreme_eigs: degenerate start vector");
  for (int i = 0; i < n; ++i) w[i] /= nrm;
  for (int i = 0; i < n; ++i) mw[i] /= nrm;
  v.push_back(w);
  mv.push_back(mw);

  for (int k = 0; k < iters; ++k) {
    std::vector<double> s = a(mv[k]);  // A M v_k
    double ak = dot(s, mv[k]);
    alpha.push_back(ak);
    axpy(-ak, v[k], s);
    if (k > 0) axpy(-beta[k - 1], v[k - 1], s);
    // Full reorthogonalization against all previous basis vectors.
    for (std::size_t j = 0; j < v.size(); ++j) {
      double c = dot(s, mv[j]);
      axpy(-c, v[j], s);
    }
    std::vector<double> ms = m(s);
    double bk = std::sqrt(std::max(dot(s, ms), 0.0));
    if (bk < 1e-14 * std::max(1.0, std::abs(ak)) || static_cast<int>(v.size()) >= n) break;
    beta.push_back(bk);
    for (int i = 0; i < n; ++i) s[i] /= bk;
    for (int i = 0; i < n; ++i) ms[i] /= bk;
    v.push_back(std::move(s));
    mv.push_back(std::move(ms));
  }

  std::vector<double> off(alpha.size(), 0.0);
  for (std::size_t i = 1; i < alpha.size(); ++i) off[i] = beta[i - 1];
  std::vector<double> ritz = tridiag_eigenvalues(alpha, off);
  ExtremeEigs out;
  out.min = ritz.front();
  out.max = ritz.back();
  out.iterations = static_cast<int>(ritz.size());
  return out;
}

std::vector<double> weighted_min_norm_solve(const DenseMatrix& phi, std::span<const double> d,
                                            std::span<const double> x) {
  const int n = phi.rows();        // space dimension
  const int m = phi.cols();        // number of atoms
  require(static_cast<int>(d.size()) == m, "weighted_min_norm_solve: weight count mismatch");
  require(static_cast<int>(x.size()) == n, "weighted_min_norm_solve: rhs dimension mismatch");
  require(m >= n, "weighted_min_norm_solve: fewer atoms than dimensions");
  std::vector<double> dinv_sqrt(m);
  for (int i = 0; i < m; ++i) {
    require(d[i] > 0.0, "weighted_min_norm_solve: nonpositive weight at atom " + std::to_string(i));
    dinv_sqrt[i] = 1.0 / std::sqrt(d[i]);
  }
  // G = Phi D^{-1/2}; minimize ||u|| s.t. G u = x, then c = D^{-1/2} u.
  // Householder QR of G^T (m x n): G^T = Q R.
  DenseMatrix gt(m, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) gt(j, i) = phi(i, j) * dinv_sqrt[j];

  double gnorm = gt.frobenius_norm();
  std::vector<std::vector<double>> reflectors;
  reflectors.reserve(n);
  for (int k = 0; k < n; ++k) {
    std::vector<double> u(m, 0.0);
    double sigma = 0.0;
    for (int i = k; i < m; ++i) sigma += gt(i, k) * gt(i, k);
    double alpha = std::sqrt(sigma);
    if (!(alpha > 1e-13 * std::max(1.0, gnorm)))
      fail("weighted_min_norm_solve: atoms fail to span the space (rank deficiency at column " + std::to_string(k) + ")");
    if (gt(k, k) > 0.0) alpha = -alpha;
    double unorm2 = sigma - 2.0 * alpha * gt(k, k) + alpha * alpha;
    u[k] = gt(k, k) - alpha;
    for (int i = k + 1; i < m; ++i) u[i] = gt(i, k);
    double scale = 2.0 / unorm2;
    for (int j = k; j < n; ++j) {
      double s = 0.0;
      for (int i = k; i < m; ++i) s += u[i] * gt(i, j);
      s *= scale;
      for (int i = k; i < m; ++i) gt(i, j) -= s * u[i];
    }
    reflectors.push_back(std::move(u));
  }
  // Solve R^T y = x (R^T lower triangular, stored in the top of gt).
  std::vector<double> y(x.begin(), x.end());
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int j = 0; j < i; ++j) s -= gt(j, i) * y[j];
    y[i] = s / gt(i, i);
  }
  // u = Q [y; 0]: apply reflectors in reverse.
  std::vector<double> u(m, 0.0);
  std::copy(y.begin(), y.end(), u.begin());
  for (int k = n - 1; k >= 0; --k) {
    const auto& h = reflectors[k];
    double unorm2 = 0.0;
    for (int i = k; i < m; ++i) unorm2 += h[i] * h[i];
    double s = 0.0;
    for (int i = k; i < m; ++i) s += h[i] * u[i];
    s *= 2.0 / unorm2;
    for (int i = k; i < m; ++i) u[i] -= s * h[i];
  }
  std::vector<double> c(m);
  for (int i = 0; i < m; ++i) c[i] = dinv_sqrt[i] * u[i];
  return c;
}

}  // namespace negsob
