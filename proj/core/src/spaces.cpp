#include "negsob/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace negsob {

namespace {

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const {
    return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ p.second);
  }
};

// Gauss-Jordan inverse with partial pivoting; only used for tiny reference
// matrices (<= 10 x 10).
DenseMatrix invert_small(DenseMatrix a) {
  const int n = a.rows();
  DenseMatrix inv = DenseMatrix::identity(n);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    require(std::abs(a(piv, k)) > 1e-14, "invert_small: singular matrix");
    if (piv != k)
      for (int j = 0; j < n; ++j) {
        std::swap(a(k, j), a(piv, j));
        std::swap(inv(k, j), inv(piv, j));
      }
    double d = 1.0 / a(k, k);
    for (int j = 0; j < n; ++j) {
      a(k, j) *= d;
      inv(k, j) *= d;
    }
    for (int i = 0; i < n; ++i) {
      if (i == k) continue;
      double f = a(i, k);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a(i, j) -= f * a(k, j);
        inv(i, j) -= f * inv(k, j);
      }
    }
  }
  return inv;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// int over the reference triangle of x^a y^b.
double mono_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

}  // namespace

namespace p3ref {

const std::array<std::array<int, 3>, kNodes>& node_multi_indices() {
  static const std::array<std::array<int, 3>, kNodes> idx = [] {
    std::array<std::array<int, 3>, kNodes> v{};
    int n = 0;
    for (int i = 3; i >= 0; --i)
      for (int j = 3 - i; j >= 0; --j) v[n++] = {i, j, 3 - i - j};
    return v;
  }();
  return idx;
}

namespace {

std::array<double, kNodes> monomials3(double x, double y) {
  return {1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y};
}

const std::array<std::array<int, 2>, kNodes> kMonoExp = {
    {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}}};

// Columns: monomial coefficients of each Lagrange basis function.
const DenseMatrix& coeff_matrix() {
  static const DenseMatrix c = [] {
    DenseMatrix v(kNodes, kNodes);
    const auto& mi = node_multi_indices();
    for (int n = 0; n < kNodes; ++n) {
      double x = mi[n][1] / 3.0, y = mi[n][2] / 3.0;
      auto m = monomials3(x, y);
      for (int k = 0; k < kNodes; ++k) v(n, k) = m[k];
    }
    return invert_small(v);
  }();
  return c;
}

}  // namespace

std::array<double, kNodes> eval_basis(double x, double y) {
  const DenseMatrix& c = coeff_matrix();
  auto m = monomials3(x, y);
  std::array<double, kNodes> out{};
  for (int i = 0; i < kNodes; ++i) {
    double s = 0.0;
    for (int k = 0; k < kNodes; ++k) s += c(k, i) * m[k];
    out[i] = s;
  }
  return out;
}

const std::array<double, kNodes>& basis_integrals() {
  static const std::array<double, kNodes> w = [] {
    const DenseMatrix& c = coeff_matrix();
    std::array<double, kNodes> out{};
    for (int i = 0; i < kNodes; ++i) {
      double s = 0.0;
      for (int k = 0; k < kNodes; ++k) s += c(k, i) * mono_integral(kMonoExp[k][0], kMonoExp[k][1]);
      out[i] = s;
    }
    return out;
  }();
  return w;
}

}  // namespace p3ref

HaarAtom haar_atom(const MeshHierarchy& h, int level, int facet) {
  const LevelMesh& lm = h.level(level);
  require(facet >= 0 && facet < lm.num_facets(),
          "haar_atom: unknown facet " + std::to_string(facet) + " at level " + std::to_string(level));
  const Facet& f = lm.facets[facet];
  HaarAtom a;
  a.level = level;
  a.facet = facet;
  a.plus = f.plus;
  a.minus = f.minus;
  auto [x0, y0] = h.vertex_xy(f.v[0]);
  auto [x1, y1] = h.vertex_xy(f.v[1]);
  a.facet_length = std::hypot(x1 - x0, y1 - y0);
  a.weight_plus = a.facet_length / h.elem_area(level, f.plus);
  a.weight_minus = f.boundary() ? 0.0 : -a.facet_length / h.elem_area(level, f.minus);
  return a;
}

P0Fn haar_fn(const MeshHierarchy& h, int level, int facet) {
  HaarAtom a = haar_atom(h, level, facet);
  P0Fn f;
  f.level = level;
  f.coeff.assign(h.level(level).num_elements(), 0.0);
  f.coeff[a.plus] = a.weight_plus;
  if (a.minus >= 0) f.coeff[a.minus] = a.weight_minus;
  return f;
}

double haar_l2_norm_sq(const MeshHierarchy& h, const HaarAtom& atom) {
  double s = atom.weight_plus * atom.weight_plus * h.elem_area(atom.level, atom.plus);
  if (atom.minus >= 0) s += atom.weight_minus * atom.weight_minus * h.elem_area(atom.level, atom.minus);
  return s;
}

TildeFacetSets tilde_facet_sets(const MeshHierarchy& h) {
  TildeFacetSets out;
  const int L = h.finest_level();
  out.reduced.resize(L + 1);
  out.reduced_interior.resize(L + 1);
  out.in_reduced.resize(L + 1);
  out.assoc_level.resize(L + 1);
  out.assoc_facet.resize(L + 1);

  std::unordered_map<std::pair<int, int>, int, PairHash> prev_facets;
  for (int l = 0; l <= L; ++l) {
    const LevelMesh& lm = h.level(l);
    out.in_reduced[l].assign(lm.num_facets(), 0);
    out.assoc_level[l].assign(lm.num_facets(), -1);
    out.assoc_facet[l].assign(lm.num_facets(), -1);
    for (int fi = 0; fi < lm.num_facets(); ++fi) {
      const Facet& f = lm.facets[fi];
      bool keep;
      int prev_id = -1;
      if (l == 0) {
        keep = true;
      } else {
        auto it = prev_facets.find({f.v[0], f.v[1]});
        if (it == prev_facets.end()) {
          keep = true;  // new facet
        } else {
          prev_id = it->second;
          const Facet& pf = h.level(l - 1).facets[prev_id];
          // Support shrank iff an adjacent element was bisected.
          keep = h.refined_at(l - 1, pf.plus) || (!pf.boundary() && h.refined_at(l - 1, pf.minus));
        }
      }
      if (keep) {
        out.in_reduced[l][fi] = 1;
        out.reduced[l].push_back(fi);
        if (!f.boundary()) out.reduced_interior[l].push_back(fi);
        out.assoc_level[l][fi] = l;
        out.assoc_facet[l][fi] = fi;
      } else {
        out.assoc_level[l][fi] = out.assoc_level[l - 1][prev_id];
        out.assoc_facet[l][fi] = out.assoc_facet[l - 1][prev_id];
      }
    }
    out.total_reduced += static_cast<long long>(out.reduced[l].size());
    out.total_reduced_interior += static_cast<long long>(out.reduced_interior[l].size());
    if (l < L) {
      prev_facets.clear();
      prev_facets.reserve(lm.num_facets() * 2);
      for (int fi = 0; fi < lm.num_facets(); ++fi)
        prev_facets.emplace(std::make_pair(lm.facets[fi].v[0], lm.facets[fi].v[1]), fi);
    }
  }
  return out;
}

SparseMatrix transfer_matrix(const MeshHierarchy& h, int from_level) {
  require(from_level + 1 < h.num_levels(), "transfer_matrix: no finer level");
  const int nf = h.level(from_level + 1).num_elements();
  std::vector<int> offsets(nf + 1), indices(nf);
  std::vector<double> values(nf, 1.0);
  for (int j = 0; j < nf; ++j) {
    offsets[j] = j;
    indices[j] = h.father(from_level + 1, j);
  }
  offsets[nf] = nf;
  return SparseMatrix(nf, h.level(from_level).num_elements(), std::move(offsets), std::move(indices),
                      std::move(values));
}

P0Fn prolong_p0(const MeshHierarchy& h, const P0Fn& f, int to_level) {
  require(to_level >= f.level && to_level < h.num_levels(), "prolong_p0: level out of range");
  require(static_cast<int>(f.coeff.size()) == h.level(f.level).num_elements(), "prolong_p0: wrong coefficient count");
  P0Fn out = f;
  for (int l = f.level; l < to_level; ++l) {
    const int nf = h.level(l + 1).num_elements();
    std::vector<double> next(nf);
    for (int j = 0; j < nf; ++j) next[j] = out.coeff[h.father(l + 1, j)];
    out.coeff = std::move(next);
    out.level = l + 1;
    OpCounter::add(nf);
  }
  return out;
}

std::vector<double> restrict_dual_p0(const MeshHierarchy& h, std::span<const double> dual, int from_level,
                                     int to_level) {
  require(to_level <= from_level, "restrict_dual_p0: target level must be coarser");
  std::vector<double> cur(dual.begin(), dual.end());
  for (int l = from_level; l > to_level; --l) {
    std::vector<double> next(h.level(l - 1).num_elements(), 0.0);
    for (int j = 0; j < static_cast<int>(cur.size()); ++j) next[h.father(l, j)] += cur[j];
    cur = std::move(next);
    OpCounter::add(cur.size());
  }
  return cur;
}

double l2_inner_p0(const MeshHierarchy& h, const P0Fn& a, const P0Fn& b) {
  const int l = std::max(a.level, b.level);
  P0Fn ap = (a.level == l) ? a : prolong_p0(h, a, l);
  P0Fn bp = (b.level == l) ? b : prolong_p0(h, b, l);
  const LevelMesh& lm = h.level(l);
  double s = 0.0;
  for (int i = 0; i < lm.num_elements(); ++i) s += h.elem_area(l, i) * ap.coeff[i] * bp.coeff[i];
  return s;
}

double l2_norm_sq_p0(const MeshHierarchy& h, const P0Fn& a) { return l2_inner_p0(h, a, a); }

double l2_inner_p1disc(const MeshHierarchy& h, const P1DiscFn& a, const P1DiscFn& b) {
  require(a.level == b.level, "l2_inner_p1disc: mismatched levels");
  const LevelMesh& lm = h.level(a.level);
  require(static_cast<int>(a.values.size()) == 3 * lm.num_elements(), "l2_inner_p1disc: wrong value count");
  double s = 0.0;
  for (int i = 0; i < lm.num_elements(); ++i) {
    const double* u = a.values.data() + 3 * i;
    const double* v = b.values.data() + 3 * i;
    double su = u[0] + u[1] + u[2], sv = v[0] + v[1] + v[2];
    // |T|/12 * (u . v + (sum u)(sum v))
    s += h.elem_area(a.level, i) / 12.0 * (u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + su * sv);
  }
  return s;
}

double l2_norm_sq_p1disc(const MeshHierarchy& h, const P1DiscFn& a) { return l2_inner_p1disc(h, a, a); }

P1DiscFn p0_as_p1disc(const P0Fn& f) {
  P1DiscFn g;
  g.level = f.level;
  g.values.resize(3 * f.coeff.size());
  for (std::size_t i = 0; i < f.coeff.size(); ++i) g.values[3 * i] = g.values[3 * i + 1] = g.values[3 * i + 2] = f.coeff[i];
  return g;
}

P0Fn p1disc_mean(const P1DiscFn& f) {
  P0Fn g;
  g.level = f.level;
  g.coeff.resize(f.values.size() / 3);
  for (std::size_t i = 0; i < g.coeff.size(); ++i)
    g.coeff[i] = (f.values[3 * i] + f.values[3 * i + 1] + f.values[3 * i + 2]) / 3.0;
  return g;
}

std::array<double, 3> barycentric(const MeshHierarchy& h, int tree_id, double px, double py) {
  const auto& v = h.forest()[tree_id].v;
  auto [x0, y0] = h.vertex_xy(v[0]);
  auto [x1, y1] = h.vertex_xy(v[1]);
  auto [x2, y2] = h.vertex_xy(v[2]);
  double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
  double l1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) / det;
  double l2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) / det;
  return {1.0 - l1 - l2, l1, l2};
}

P1DiscFn lift_p1disc(const MeshHierarchy& h, const P1DiscFn& f, int to_level) {
  require(to_level >= f.level && to_level < h.num_levels(), "lift_p1disc: level out of range");
  P1DiscFn cur = f;
  for (int l = f.level; l < to_level; ++l) {
    const LevelMesh& fine = h.level(l + 1);
    P1DiscFn next;
    next.level = l + 1;
    next.values.assign(3 * fine.num_elements(), 0.0);
    for (int j = 0; j < fine.num_elements(); ++j) {
      int i = h.father(l + 1, j);
      int tc = h.level(l).elems[i];
      const double* u = cur.values.data() + 3 * i;
      const auto& vj = h.forest()[fine.elems[j]].v;
      for (int k = 0; k < 3; ++k) {
        auto [px, py] = h.vertex_xy(vj[k]);
        auto lam = barycentric(h, tc, px, py);
        next.values[3 * j + k] = lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2];
      }
    }
    cur = std::move(next);
    OpCounter::add(fine.num_elements());
  }
  return cur;
}

namespace {

// Universal child-to-father moment transforms. Child slot 0 = (c, a, m),
// slot 1 = (b, c, m) in father barycentric coordinates; the transforms are
// geometry independent.
const std::array<DenseMatrix, 2>& bisection_moment_transforms() {
  static const std::array<DenseMatrix, 2> b = [] {
    const std::array<std::array<std::array<double, 3>, 3>, 2> child_bary = {{
        {{{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.5, 0.5, 0.0}}},  // (c, a, m)
        {{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}}},  // (b, c, m)
    }};
    std::array<DenseMatrix, 2> out{DenseMatrix(p3ref::kNodes, p3ref::kNodes), DenseMatrix(p3ref::kNodes, p3ref::kNodes)};
    const auto& mi = p3ref::node_multi_indices();
    for (int slot = 0; slot < 2; ++slot) {
      for (int n = 0; n < p3ref::kNodes; ++n) {
        std::array<double, 3> fb{0.0, 0.0, 0.0};
        for (int k = 0; k < 3; ++k)
          for (int c = 0; c < 3; ++c) fb[c] += mi[n][k] / 3.0 * child_bary[slot][k][c];
        auto vals = p3ref::eval_basis(fb[1], fb[2]);
        for (int i = 0; i < p3ref::kNodes; ++i) out[slot](i, n) = vals[i];
      }
    }
    return out;
  }();
  return b;
}

}  // namespace

MomentTable::MomentTable(const MeshHierarchy& h, const P0Fn& fine) : h_(&h), source_level_(fine.level) {
  const LevelMesh& lm = h.level(source_level_);
  require(static_cast<int>(fine.coeff.size()) == lm.num_elements(), "MomentTable: wrong coefficient count");
  const auto& forest = h.forest();
  m_.assign(static_cast<std::size_t>(forest.size()) * 10, 0.0);
  const auto& w = p3ref::basis_integrals();
  for (int i = 0; i < lm.num_elements(); ++i) {
    int t = lm.elems[i];
    double scale = 2.0 * h.area(t) * fine.coeff[i];
    for (int k = 0; k < 10; ++k) m_[static_cast<std::size_t>(t) * 10 + k] = scale * w[k];
  }
  OpCounter::add(lm.num_elements());
  const auto& b = bisection_moment_transforms();
  for (int u = static_cast<int>(forest.size()) - 1; u >= 0; --u) {
    const TreeElement& e = forest[u];
    if (e.birth_level > source_level_) continue;
    bool alive_at_source = e.birth_level <= source_level_ && source_level_ < e.death_level;
    if (alive_at_source) continue;
    if (e.child[0] < 0) continue;
    double* mu = m_.data() + static_cast<std::size_t>(u) * 10;
    for (int slot = 0; slot < 2; ++slot) {
      const double* mc = m_.data() + static_cast<std::size_t>(e.child[slot]) * 10;
      const DenseMatrix& t = b[slot];
      for (int i = 0; i < 10; ++i) {
        double s = 0.0;
        for (int n = 0; n < 10; ++n) s += t(i, n) * mc[n];
        mu[i] += s;
      }
    }
    OpCounter::add(1);
  }
}

std::array<double, 3> MomentTable::linear_moments(int tree_id) const {
  const auto& mi = p3ref::node_multi_indices();
  const double* m = m_.data() + static_cast<std::size_t>(tree_id) * 10;
  std::array<double, 3> out{0.0, 0.0, 0.0};
  for (int n = 0; n < 10; ++n)
    for (int k = 0; k < 3; ++k) out[k] += mi[n][k] / 3.0 * m[n];
  return out;
}

double MomentTable::bubble_moment(int tree_id) const {
  const auto& mi = p3ref::node_multi_indices();
  const double* m = m_.data() + static_cast<std::size_t>(tree_id) * 10;
  double s = 0.0;
  for (int n = 0; n < 10; ++n) {
    double b = (mi[n][0] / 3.0) * (mi[n][1] / 3.0) * (mi[n][2] / 3.0);
    if (b != 0.0) s += b * m[n];
  }
  return s;
}

double MomentTable::mean_moment(int tree_id) const {
  const double* m = m_.data() + static_cast<std::size_t>(tree_id) * 10;
  double s = 0.0;
  for (int n = 0; n < 10; ++n) s += m[n];
  return s;
}

StarBasis star_basis_build(int degree) {
  require(degree == 1 || degree == 2, "star_basis_build: unsupported degree " + std::to_string(degree) +
                                          " (only p in {1,2})");
  StarBasis b;
  b.degree = degree;
  const int nm = (degree + 1) * (degree + 2) / 2;
  b.dim = nm - 1;
  const std::array<std::array<int, 2>, 6> exps = {{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};

  b.mono_integrals.resize(nm);
  b.mono_gram = DenseMatrix(nm, nm);
  for (int i = 0; i < nm; ++i) {
    b.mono_integrals[i] = mono_integral(exps[i][0], exps[i][1]);
    for (int j = 0; j < nm; ++j) b.mono_gram(i, j) = mono_integral(exps[i][0] + exps[j][0], exps[i][1] + exps[j][1]);
  }

  // Gram-Schmidt over the monomials, constants first; the tail spans the
  // zero-mean complement.
  std::vector<std::vector<double>> ortho;
  for (int k = 0; k < nm; ++k) {
    std::vector<double> v(nm, 0.0);
    v[k] = 1.0;
    for (const auto& u : ortho) {
      double proj = 0.0;
      for (int i = 0; i < nm; ++i)
        for (int j = 0; j < nm; ++j) proj += v[i] * b.mono_gram(i, j) * u[j];
      for (int i = 0; i < nm; ++i) v[i] -= proj * u[i];
    }
    double nrm2 = 0.0;
    for (int i = 0; i < nm; ++i)
      for (int j = 0; j < nm; ++j) nrm2 += v[i] * b.mono_gram(i, j) * v[j];
    require(nrm2 > 1e-14, "star_basis_build: degenerate Gram-Schmidt step");
    double inv = 1.0 / std::sqrt(nrm2);
    for (auto& x : v) x *= inv;
    ortho.push_back(std::move(v));
  }
  b.mono_coeffs.assign(ortho.begin() + 1, ortho.end());

  // Lagrange nodes: vertices, then edge midpoints 01, 12, 20 for p = 2.
  b.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  if (degree == 2) {
    b.nodes.push_back({0.5, 0.0});
    b.nodes.push_back({0.5, 0.5});
    b.nodes.push_back({0.0, 0.5});
  }
  auto eval_mono = [&](const std::vector<double>& c, double x, double y) {
    double s = 0.0;
    for (int i = 0; i < nm; ++i) s += c[i] * std::pow(x, exps[i][0]) * std::pow(y, exps[i][1]);
    return s;
  };
  b.node_values.assign(b.dim, std::vector<double>(nm, 0.0));
  for (int j = 0; j < b.dim; ++j)
    for (int n = 0; n < nm; ++n) b.node_values[j][n] = eval_mono(b.mono_coeffs[j], b.nodes[n][0], b.nodes[n][1]);

  DenseMatrix vand(nm, nm);
  for (int n = 0; n < nm; ++n)
    for (int k = 0; k < nm; ++k) vand(n, k) = std::pow(b.nodes[n][0], exps[k][0]) * std::pow(b.nodes[n][1], exps[k][1]);
  b.node_to_mono = invert_small(vand);
  return b;
}

StarSplitResult star_split(const MeshHierarchy& h, const PpDiscFn& f, const StarBasis& basis) {
  require(f.degree == basis.degree, "star_split: degree mismatch");
  const LevelMesh& lm = h.level(f.level);
  const int nm = basis.dim + 1;
  require(static_cast<int>(f.values.size()) == nm * lm.num_elements(), "star_split: wrong value count");
  StarSplitResult out;
  out.mean.level = f.level;
  out.mean.coeff.assign(lm.num_elements(), 0.0);
  out.star_coeff.assign(static_cast<std::size_t>(basis.dim) * lm.num_elements(), 0.0);
  std::vector<double> mono(nm);
  for (int e = 0; e < lm.num_elements(); ++e) {
    // nodal values -> reference monomial coefficients
    for (int k = 0; k < nm; ++k) {
      double s = 0.0;
      for (int n = 0; n < nm; ++n) s += basis.node_to_mono(k, n) * f.values[static_cast<std::size_t>(nm) * e + n];
      mono[k] = s;
    }
    // mean over T equals 2 * int_ref (reference area is 1/2)
    double mean = 0.0;
    for (int k = 0; k < nm; ++k) mean += mono[k] * basis.mono_integrals[k];
    out.mean.coeff[e] = 2.0 * mean;
    for (int j = 0; j < basis.dim; ++j) {
      double c = 0.0;  // <phi, chi_j>_ref; mapped coefficient is identical
      for (int a = 0; a < nm; ++a)
        for (int bidx = 0; bidx < nm; ++bidx) c += mono[a] * basis.mono_gram(a, bidx) * basis.mono_coeffs[j][bidx];
      out.star_coeff[static_cast<std::size_t>(basis.dim) * e + j] = c;
    }
  }
  return out;
}

PpDiscFn star_reconstruct(const MeshHierarchy& h, const StarSplitResult& split, const StarBasis& basis) {
  const LevelMesh& lm = h.level(split.mean.level);
  const int nm = basis.dim + 1;
  PpDiscFn f;
  f.level = split.mean.level;
  f.degree = basis.degree;
  f.values.assign(static_cast<std::size_t>(nm) * lm.num_elements(), 0.0);
  for (int e = 0; e < lm.num_elements(); ++e)
    for (int n = 0; n < nm; ++n) {
      double v = split.mean.coeff[e];
      for (int j = 0; j < basis.dim; ++j)
        v += split.star_coeff[static_cast<std::size_t>(basis.dim) * e + j] * basis.node_values[j][n];
      f.values[static_cast<std::size_t>(nm) * e + n] = v;
    }
  return f;
}

}  // namespace negsob
