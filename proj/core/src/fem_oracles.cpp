#include "negsob/fem_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace negsob {

namespace {

// Element stiffness for conforming P1: K_ij = (b_i b_j + c_i c_j) / (4|T|).
void p1_element_stiffness(const MeshHierarchy& h, int tree_id, double k[3][3]) {
  const auto& v = h.forest()[tree_id].v;
  auto [x0, y0] = h.vertex_xy(v[0]);
  auto [x1, y1] = h.vertex_xy(v[1]);
  auto [x2, y2] = h.vertex_xy(v[2]);
  double b[3] = {y1 - y2, y2 - y0, y0 - y1};
  double c[3] = {x2 - x1, x0 - x2, x1 - x0};
  double f = 1.0 / (4.0 * h.area(tree_id));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[i][j] = f * (b[i] * b[j] + c[i] * c[j]);
}

}  // namespace

DualNormSolver::DualNormSolver(const MeshHierarchy& h, Variant variant, int depth)
    : oh_(h), src_level_(h.finest_level()), variant_(variant) {
  require(depth >= 0 && depth <= 2, "DualNormSolver: oracle depth must be 0, 1 or 2");
  for (int d = 0; d < depth; ++d) oh_.refine_uniform();
  oracle_level_ = oh_.finest_level();
  const LevelMesh& om = oh_.level(oracle_level_);

  dof_of_vertex_.assign(om.num_vertices, -1);
  ndof_ = 0;
  for (int z = 0; z < om.num_vertices; ++z) {
    if (variant_ == Variant::plain && om.vertex_on_boundary[z]) continue;
    dof_of_vertex_[z] = ndof_++;
  }
  require(ndof_ > 0, "DualNormSolver: no degrees of freedom (mesh too coarse for the plain variant)");
  require(ndof_ <= kOracleFemCap,
          "DualNormSolver: companion mesh has " + std::to_string(ndof_) + " dofs, above the cap of " +
              std::to_string(kOracleFemCap));

  DenseMatrix a(ndof_, ndof_);
  double k[3][3];
  bubble_diag_.assign(om.num_elements(), 0.0);
  bubble_load_.assign(om.num_elements(), 0.0);
  bubble_dofs_.assign(om.num_elements(), {-1, -1, -1});
  bubble_coupling_.assign(om.num_elements(), {0.0, 0.0, 0.0});
  for (int e = 0; e < om.num_elements(); ++e) {
    int t = om.elems[e];
    p1_element_stiffness(oh_, t, k);
    const auto& v = oh_.forest()[t].v;
    double area = oh_.area(t);
    double mass_scale = area / 12.0;
    for (int i = 0; i < 3; ++i) {
      int di = dof_of_vertex_[v[i]];
      bubble_dofs_[e][i] = di;
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        int dj = dof_of_vertex_[v[j]];
        if (dj < 0) continue;
        double val = k[i][j];
        if (variant_ == Variant::tilde) val += mass_scale * (1.0 + (i == j ? 1.0 : 0.0));
        a(di, dj) += val;
      }
    }
    // Cubic bubble eta_b = lam0 lam1 lam2. Stiffness block:
    // grad eta_b . grad eta_b uses g_ij = grad lam_i . grad lam_j = k_ij/|T|;
    // int p_i p_j = |T|/90 (i = j) or |T|/180 (i != j) with p_i the
    // complementary quadratic. The hat-bubble stiffness coupling vanishes
    // (sum_j g_ij = 0); only the tilde mass couples.
    double abb = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) abb += (k[i][j] / area) * (i == j ? area / 90.0 : area / 180.0);
    if (variant_ == Variant::tilde) abb += area / 2520.0;  // int eta_b^2
    bubble_diag_[e] = abb;
    bubble_load_[e] = area / 60.0;
    if (variant_ == Variant::tilde)
      bubble_coupling_[e] = {area / 180.0, area / 180.0, area / 180.0};  // int eta_i eta_b
  }
  if (variant_ == Variant::tilde) {
    // static condensation: S = A_pp - sum_T A_pb A_pb^T / A_bb
    for (int e = 0; e < om.num_elements(); ++e) {
      for (int i = 0; i < 3; ++i) {
        int di = bubble_dofs_[e][i];
        if (di < 0) continue;
        for (int j = 0; j < 3; ++j) {
          int dj = bubble_dofs_[e][j];
          if (dj < 0) continue;
          a(di, dj) -= bubble_coupling_[e][i] * bubble_coupling_[e][j] / bubble_diag_[e];
        }
      }
    }
  }
  factor_ = std::make_unique<CholeskyFactor>(cholesky(a, "companion P1+bubble form"));

  // Loads of the P0(T_L) basis functions: each oracle descendant K of a
  // source element contributes |K|/3 at each of its vertices.
  const LevelMesh& sm = oh_.level(src_level_);
  elem_loads_.assign(sm.num_elements(), {});
  // source-element index of each oracle-level element
  src_of_.resize(sm.num_elements());
  for (int i = 0; i < sm.num_elements(); ++i) src_of_[i] = i;
  for (int l = src_level_; l < oracle_level_; ++l) {
    const LevelMesh& fl = oh_.level(l + 1);
    std::vector<int> next(fl.num_elements());
    for (int j = 0; j < fl.num_elements(); ++j) next[j] = src_of_[oh_.father(l + 1, j)];
    src_of_ = std::move(next);
  }
  std::vector<std::map<int, double>> acc(sm.num_elements());
  for (int e = 0; e < om.num_elements(); ++e) {
    int src = src_of_[e];
    double w = oh_.area(om.elems[e]) / 3.0;
    for (int vid : oh_.forest()[om.elems[e]].v) {
      int d = dof_of_vertex_[vid];
      if (d >= 0) acc[src][d] += w;
    }
  }
  for (int i = 0; i < sm.num_elements(); ++i)
    elem_loads_[i].assign(acc[i].begin(), acc[i].end());
}

double DualNormSolver::dual_norm_sq(std::span<const double> coeff) const {
  const int n = static_cast<int>(elem_loads_.size());
  require(static_cast<int>(coeff.size()) == n, "dual_norm_sq: coefficient count mismatch");
  std::vector<double> r(ndof_, 0.0);
  for (int i = 0; i < n; ++i) {
    if (coeff[i] == 0.0) continue;
    for (auto [d, w] : elem_loads_[i]) r[d] += coeff[i] * w;
  }
  double bubble_part = 0.0;
  for (std::size_t e = 0; e < bubble_diag_.size(); ++e) {
    double bb = coeff[src_of_[e]] * bubble_load_[e];
    if (bb == 0.0) continue;
    bubble_part += bb * bb / bubble_diag_[e];
    if (variant_ == Variant::tilde) {
      double f = bb / bubble_diag_[e];
      for (int i = 0; i < 3; ++i) {
        int d = bubble_dofs_[e][i];
        if (d >= 0) r[d] -= f * bubble_coupling_[e][i];
      }
    }
  }
  auto y = factor_->solve(r);
  return dot(r, y) + bubble_part;
}

DenseMatrix DualNormSolver::gram() const {
  const int n = static_cast<int>(elem_loads_.size());
  require(n <= kOracleGramCap, "DualNormSolver::gram: " + std::to_string(n) + " dofs exceed the dense cap of " +
                                   std::to_string(kOracleGramCap));
  std::vector<std::map<int, double>> cols(n);
  for (int i = 0; i < n; ++i)
    for (auto [d, w] : elem_loads_[i]) cols[i][d] += w;
  std::vector<double> bubble_diag_part(n, 0.0);
  for (std::size_t e = 0; e < bubble_diag_.size(); ++e) {
    int src = src_of_[e];
    double bl = bubble_load_[e];
    bubble_diag_part[src] += bl * bl / bubble_diag_[e];
    if (variant_ == Variant::tilde) {
      double f = bl / bubble_diag_[e];
      for (int i = 0; i < 3; ++i) {
        int d = bubble_dofs_[e][i];
        if (d >= 0) cols[src][d] -= f * bubble_coupling_[e][i];
      }
    }
  }
  DenseMatrix r(ndof_, n);
  for (int i = 0; i < n; ++i)
    for (auto [d, w] : cols[i]) r(d, i) = w;
  DenseMatrix x = factor_->solve_many(r);
  DenseMatrix w(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (auto [d, wt] : cols[i]) s += wt * x(d, j);
      w(i, j) = s;
    }
  for (int j = 0; j < n; ++j) w(j, j) += bubble_diag_part[j];
  w.symmetrize();
  return w;
}

DenseMatrix hminus1_gram(const MeshHierarchy& h, Variant variant, int depth) {
  return DualNormSolver(h, variant, depth).gram();
}

NormOracle::NormOracle(const MeshHierarchy& h, Variant variant, int depth)
    : h_(&h), variant_(variant), fine_level_(h.finest_level()) {
  const int n = h.level(fine_level_).num_elements();
  require(n <= kOracleGramCap,
          "NormOracle: " + std::to_string(n) + " elements exceed the dense cap of " + std::to_string(kOracleGramCap));
  DualNormSolver solver(h, variant, depth);
  w_ = solver.gram();
  mass_ = DenseMatrix(n, n);
  for (int i = 0; i < n; ++i) mass_(i, i) = h.elem_area(fine_level_, i);
  eig_ = generalized_sym_eig(mass_, w_, "P0 mass", "dual-norm Gram");
  if (n <= 2560) ztw_ = matmul(transpose(eig_.vectors), w_);
}

double NormOracle::interp_norm_sq(std::span<const double> coeff, double s) const {
  require(s >= 0.0 && s <= 1.0, "interp_norm: s must lie in [0, 1]");
  const int n = dim();
  require(static_cast<int>(coeff.size()) == n, "interp_norm: coefficient count mismatch");
  std::vector<double> y;
  if (ztw_.rows() > 0) {
    y = matvec(ztw_, coeff);
  } else {
    y = matvec_transposed(eig_.vectors, matvec(w_, coeff));
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += std::pow(eig_.values[i], 1.0 - s) * y[i] * y[i];
  return total;
}

double NormOracle::interp_norm_sq(const P0Fn& phi, double s) const {
  if (phi.level == fine_level_) return interp_norm_sq(std::span<const double>(phi.coeff), s);
  return interp_norm_sq(std::span<const double>(prolong_p0(*h_, phi, fine_level_).coeff), s);
}

double NormOracle::interp_norm(const P0Fn& phi, double s) const { return std::sqrt(interp_norm_sq(phi, s)); }

double NormOracle::w_norm_sq(std::span<const double> coeff) const {
  auto wx = matvec(w_, coeff);
  return dot(coeff, wx);
}

double NormOracle::l2_norm_sq(std::span<const double> coeff) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += mass_(i, i) * coeff[i] * coeff[i];
  return s;
}

P0Fn NormOracle::project_dual(const P0Fn& phi, int target_level) const {
  require(target_level >= 0 && target_level <= fine_level_, "project_dual: level out of range");
  P0Fn fine = (phi.level == fine_level_) ? phi : prolong_p0(*h_, phi, fine_level_);
  const int n = dim();
  const int nc = h_->level(target_level).num_elements();
  // ancestor map fine -> target
  std::vector<int> anc(n);
  for (int i = 0; i < n; ++i) anc[i] = i;
  for (int l = fine_level_; l > target_level; --l)
    for (int i = 0; i < n; ++i) anc[i] = h_->father(l, anc[i]);
  // W R (n x nc), then R^T W R and R^T W x
  DenseMatrix wr(n, nc);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) wr(i, anc[j]) += w_(i, j);
  DenseMatrix rtwr(nc, nc);
  std::vector<double> rtwx(nc, 0.0);
  auto wx = matvec(w_, fine.coeff);
  for (int i = 0; i < n; ++i) {
    int ai = anc[i];
    rtwx[ai] += wx[i];
    for (int j = 0; j < nc; ++j) rtwr(ai, j) += wr(i, j);
  }
  rtwr.symmetrize();
  auto y = cholesky_solve(rtwr, rtwx, "restricted dual Gram");
  P0Fn out;
  out.level = target_level;
  out.coeff = std::move(y);
  return out;
}

MixedLiftResult mixed_lift(const MeshHierarchy& h, int level, const std::vector<int>& submesh,
                           std::span<const double> rhs, const std::vector<int>& clamped_facets) {
  const LevelMesh& lm = h.level(level);
  MixedLiftResult out;
  out.level = level;
  out.submesh = submesh;
  std::sort(out.submesh.begin(), out.submesh.end());
  out.submesh.erase(std::unique(out.submesh.begin(), out.submesh.end()), out.submesh.end());
  const int m = static_cast<int>(out.submesh.size());
  require(m > 0, "mixed_lift: empty submesh");
  require(static_cast<int>(rhs.size()) == m, "mixed_lift: rhs size mismatch");

  std::vector<int> local_of(lm.num_elements(), -1);
  for (int i = 0; i < m; ++i) local_of[out.submesh[i]] = i;

  // facets touching the submesh; detect which are interior to it
  std::set<int> clamp(clamped_facets.begin(), clamped_facets.end());
  std::vector<int> facets;
  std::vector<char> facet_seen(lm.num_facets(), 0);
  for (int e : out.submesh)
    for (int k = 0; k < 3; ++k) {
      int f = lm.elem_facets[e][k];
      if (!facet_seen[f]) {
        facet_seen[f] = 1;
        facets.push_back(f);
      }
    }
  std::sort(facets.begin(), facets.end());
  for (int f : clamped_facets) require(facet_seen[f], "mixed_lift: clamped facet " + std::to_string(f) + " not in the submesh");

  // connectivity check via shared interior facets
  {
    std::vector<int> comp(m, -1);
    std::vector<int> stack{0};
    comp[0] = 0;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      int e = out.submesh[i];
      for (int k = 0; k < 3; ++k) {
        const Facet& f = lm.facets[lm.elem_facets[e][k]];
        int other = (f.plus == e) ? f.minus : f.plus;
        if (other < 0) continue;
        int oi = local_of[other];
        if (oi >= 0 && comp[oi] < 0) {
          comp[oi] = 0;
          stack.push_back(oi);
        }
      }
    }
    for (int i = 0; i < m; ++i)
      require(comp[i] == 0, "mixed_lift: submesh is not edge-connected");
  }

  bool fully_clamped = true;
  for (int f : facets) {
    if (clamp.count(f)) continue;
    const Facet& fa = lm.facets[f];
    bool plus_in = local_of[fa.plus] >= 0;
    bool minus_in = !fa.boundary() && local_of[fa.minus] >= 0;
    if (plus_in && minus_in) {
      out.dof_facets.push_back(f);  // interior to the submesh; keeps the nullspace
    } else if (fa.boundary()) {
      out.dof_facets.push_back(f);  // free domain-boundary facet
      fully_clamped = false;
    } else {
      // A mesh-interior facet with only one side in the submesh must be
      // clamped: otherwise the harvested coefficient would not match the
      // two-sided facet atom.
      fail("mixed_lift: relative-boundary facet " + std::to_string(f) + " must be clamped");
    }
  }
  const int n = static_cast<int>(out.dof_facets.size());

  if (fully_clamped || n == 0) {
    double mean = 0.0, scale = 0.0;
    for (int i = 0; i < m; ++i) {
      mean += rhs[i] * h.elem_area(level, out.submesh[i]);
      scale = std::max(scale, std::abs(rhs[i]));
    }
    if (std::abs(mean) > 1e-10 * std::max(1.0, scale))
      fail("mixed_lift: incompatible right-hand side (mean " + fmt_double(mean) + " with a fully clamped boundary)");
  }
  if (n == 0) {
    out.divergence.assign(m, 0.0);
    double rmax = 0.0, rscale = 1.0;
    for (int i = 0; i < m; ++i) {
      rmax = std::max(rmax, std::abs(rhs[i]));
      rscale = std::max(rscale, std::abs(rhs[i]));
    }
    out.div_residual = rmax / rscale;
    return out;
  }

  std::vector<int> dof_of_facet(lm.num_facets(), -1);
  for (int d = 0; d < n; ++d) dof_of_facet[out.dof_facets[d]] = d;

  // RT0 mass on the submesh and the divergence map.
  DenseMatrix g(n, n);
  DenseMatrix dmat(m, n);
  for (int i = 0; i < m; ++i) {
    int e = out.submesh[i];
    int t = lm.elems[e];
    const auto& v = h.forest()[t].v;
    double area = h.elem_area(level, e);
    std::array<std::array<double, 2>, 3> xy;
    for (int k = 0; k < 3; ++k) xy[k] = h.vertex_xy(v[k]);
    // local edge k = (v_k, v_{k+1}), opposite vertex v_{k+2}
    for (int k = 0; k < 3; ++k) {
      int fk = lm.elem_facets[e][k];
      int dk = dof_of_facet[fk];
      if (dk < 0) continue;
      const Facet& fa = lm.facets[fk];
      double sgn_k = (fa.plus == e) ? 1.0 : -1.0;
      auto [ax, ay] = h.vertex_xy(fa.v[0]);
      auto [bx, by] = h.vertex_xy(fa.v[1]);
      double len_k = std::hypot(bx - ax, by - ay);
      dmat(i, dk) = sgn_k * len_k / area;
      const auto& pk = xy[(k + 2) % 3];  // opposite vertex
      for (int l = 0; l < 3; ++l) {
        int fl = lm.elem_facets[e][l];
        int dl = dof_of_facet[fl];
        if (dl < 0) continue;
        const Facet& fb = lm.facets[fl];
        double sgn_l = (fb.plus == e) ? 1.0 : -1.0;
        auto [cx, cy] = h.vertex_xy(fb.v[0]);
        auto [dx2, dy2] = h.vertex_xy(fb.v[1]);
        double len_l = std::hypot(dx2 - cx, dy2 - cy);
        const auto& pl = xy[(l + 2) % 3];
        // int_T (x - p_k).(x - p_l) via the midpoint rule (exact, degree 2)
        double s = 0.0;
        for (int mside = 0; mside < 3; ++mside) {
          double mx = 0.5 * (xy[mside][0] + xy[(mside + 1) % 3][0]);
          double my = 0.5 * (xy[mside][1] + xy[(mside + 1) % 3][1]);
          s += (mx - pk[0]) * (mx - pl[0]) + (my - pk[1]) * (my - pl[1]);
        }
        s *= area / 3.0;
        g(dk, dl) += sgn_k * sgn_l * (len_k / (2.0 * area)) * (len_l / (2.0 * area)) * s;
      }
    }
  }
  g.symmetrize();

  // Minimal-norm solve: S mu = rhs with S = D G^{-1} D^T, c = G^{-1} D^T mu.
  auto gchol = cholesky(g, "RT0 mass");
  DenseMatrix dt = transpose(dmat);
  DenseMatrix ginv_dt = gchol.solve_many(dt);
  DenseMatrix s = matmul(dmat, ginv_dt);
  s.symmetrize();
  std::vector<double> rhs_v(rhs.begin(), rhs.end());
  if (fully_clamped) {
    // one-dimensional nullspace spanned by the element areas
    std::vector<double> q(m);
    double qn = 0.0;
    for (int i = 0; i < m; ++i) {
      q[i] = h.elem_area(level, out.submesh[i]);
      qn += q[i] * q[i];
    }
    double tr = 0.0;
    for (int i = 0; i < m; ++i) tr += s(i, i);
    double rho = std::max(tr / m, 1e-300) / qn;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) s(i, j) += rho * q[i] * q[j];
  }
  auto mu = cholesky_solve(s, rhs_v, "mixed-lift Schur complement");
  out.coeff = matvec(ginv_dt, mu);
  out.divergence = matvec(dmat, out.coeff);
  double quad = 0.0;
  {
    auto gc = matvec(g, out.coeff);
    quad = dot(out.coeff, gc);
  }
  out.sigma_norm = std::sqrt(std::max(quad, 0.0));
  double rmax = 0.0, rscale = 1.0;
  for (int i = 0; i < m; ++i) {
    rmax = std::max(rmax, std::abs(out.divergence[i] - rhs[i]));
    rscale = std::max(rscale, std::abs(rhs[i]));
  }
  out.div_residual = rmax / rscale;
  return out;
}

}  // namespace negsob
