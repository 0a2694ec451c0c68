#include "negsob/operators.hpp"

#include <cmath>
#include <mutex>

namespace negsob {

Variant parse_variant(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "tilde") return Variant::tilde;
  fail("unknown variant `" + s + "` (expected plain or tilde)");
}

P0Fn l2_project_p0(const MeshHierarchy& h, const P0Fn& f, int target_level) {
  require(target_level >= 0 && target_level <= f.level, "l2_project_p0: level out of range");
  P0Fn cur = f;
  for (int l = f.level; l > target_level; --l) {
    const int nc = h.level(l - 1).num_elements();
    std::vector<double> next(nc, 0.0);
    for (int j = 0; j < static_cast<int>(cur.coeff.size()); ++j)
      next[h.father(l, j)] += cur.coeff[j] * h.elem_area(l, j);
    for (int i = 0; i < nc; ++i) next[i] /= h.elem_area(l - 1, i);
    cur.coeff = std::move(next);
    cur.level = l - 1;
    OpCounter::add(nc);
  }
  return cur;
}

void verify_dual_node_constants() {
  // On any triangle, M^{-1} maps the hat basis to the dual basis; the claim
  // is M * (alpha I + beta J)/|T| = I with M_ij = |T|(1+delta_ij)/12.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        double m_ik = (1.0 + (i == k ? 1.0 : 0.0)) / 12.0;
        double c_kj = kDualNodeAlpha * (k == j ? 1.0 : 0.0) + kDualNodeBeta;
        s += m_ik * c_kj;
      }
      require(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-12,
              "dual-node constants failed the reference mass-matrix self-test");
    }
}

namespace {

std::once_flag g_dual_check;

void ensure_dual_constants() {
  std::call_once(g_dual_check, [] { verify_dual_node_constants(); });
}

struct Workspace {
  // per needed vertex: c_z = <phi, eta_z>, |Omega(z)|, and the same pair for
  // the bubble correction term
  std::vector<double> cz, patch_area, cz_bubble;
  std::vector<char> vertex_needed;
};

// Gathers the vertex weights over each needed vertex's star in ascending
// element order (the order a full scatter would use, so masked and full
// evaluations agree bitwise).
void gather_vertex_weights(const MeshHierarchy& h, int level, const MomentTable& mt,
                           const std::vector<int>& needed_vertices, Workspace& w) {
  const LevelMesh& lm = h.level(level);
  w.cz.assign(lm.num_vertices, 0.0);
  w.patch_area.assign(lm.num_vertices, 0.0);
  w.cz_bubble.assign(lm.num_vertices, 0.0);
  for (int z : needed_vertices) {
    double c = 0.0, a = 0.0, cb = 0.0;
    for (int e : lm.vertex_elems[z]) {
      int t = lm.elems[e];
      auto lmom = mt.linear_moments(t);
      int k = 0;
      const auto& v = h.forest()[t].v;
      while (v[k] != z) ++k;
      c += lmom[k];
      double area = h.area(t);
      a += area;
      // bubble coefficient of the neighbor element, a pure function of t
      double bc = mt.bubble_moment(t) * 60.0 / area;
      cb += bc * area / 3.0;  // <B' phi, eta_z>_T. exact: constant against a hat
      OpCounter::add(1);
    }
    w.cz[z] = c;
    w.patch_area[z] = a;
    w.cz_bubble[z] = cb;
  }
}

bool vertex_active(const LevelMesh& lm, int z, Variant variant) {
  return variant == Variant::tilde || !lm.vertex_on_boundary[z];
}

// P'_l phi on the given elements: J' + B' - J'(B' phi), using precomputed
// vertex weights.
void eval_p_dual_on(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant, const Workspace& w,
                    const std::vector<int>& elems, P1DiscFn& out) {
  const LevelMesh& lm = h.level(level);
  for (int e : elems) {
    int t = lm.elems[e];
    const auto& v = h.forest()[t].v;
    double a[3], ab[3];
    double sum_a = 0.0, sum_ab = 0.0;
    for (int q = 0; q < 3; ++q) {
      if (vertex_active(lm, v[q], variant)) {
        a[q] = w.cz[v[q]] / w.patch_area[v[q]];
        ab[q] = w.cz_bubble[v[q]] / w.patch_area[v[q]];
      } else {
        a[q] = ab[q] = 0.0;
      }
      sum_a += a[q];
      sum_ab += ab[q];
    }
    double bubble_coeff = mt.bubble_moment(t) * 60.0 / h.area(t);
    for (int p = 0; p < 3; ++p) {
      double jval = kDualNodeAlpha * a[p] + kDualNodeBeta * sum_a;
      double jbval = kDualNodeAlpha * ab[p] + kDualNodeBeta * sum_ab;
      out.values[3 * e + p] = jval + bubble_coeff - jbval;
    }
    OpCounter::add(1);
  }
}

std::vector<int> all_vertices(const LevelMesh& lm) {
  std::vector<int> v(lm.num_vertices);
  for (int i = 0; i < lm.num_vertices; ++i) v[i] = i;
  return v;
}

std::vector<int> all_elements(const LevelMesh& lm) {
  std::vector<int> v(lm.num_elements());
  for (int i = 0; i < lm.num_elements(); ++i) v[i] = i;
  return v;
}

std::vector<int> vertices_of_elements(const MeshHierarchy& h, const LevelMesh& lm, const std::vector<int>& elems) {
  std::vector<char> flag(lm.num_vertices, 0);
  for (int e : elems)
    for (int vid : h.forest()[lm.elems[e]].v) flag[vid] = 1;
  std::vector<int> out;
  for (int z = 0; z < lm.num_vertices; ++z)
    if (flag[z]) out.push_back(z);
  return out;
}

}  // namespace

P1DiscFn sz_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant) {
  ensure_dual_constants();
  require(level >= 0 && level <= mt.source_level(), "sz_dual_apply: level out of range");
  const LevelMesh& lm = h.level(level);
  Workspace w;
  gather_vertex_weights(h, level, mt, all_vertices(lm), w);
  P1DiscFn out;
  out.level = level;
  out.values.assign(3 * lm.num_elements(), 0.0);
  for (int e = 0; e < lm.num_elements(); ++e) {
    const auto& v = h.forest()[lm.elems[e]].v;
    double a[3];
    double sum_a = 0.0;
    for (int q = 0; q < 3; ++q) {
      a[q] = vertex_active(lm, v[q], variant) ? w.cz[v[q]] / w.patch_area[v[q]] : 0.0;
      sum_a += a[q];
    }
    for (int p = 0; p < 3; ++p) out.values[3 * e + p] = kDualNodeAlpha * a[p] + kDualNodeBeta * sum_a;
  }
  return out;
}

P1DiscFn sz_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant) {
  return sz_dual_apply(h, level, MomentTable(h, phi), variant);
}

P0Fn bubble_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt) {
  require(level >= 0 && level <= mt.source_level(), "bubble_dual_apply: level out of range");
  const LevelMesh& lm = h.level(level);
  P0Fn out;
  out.level = level;
  out.coeff.resize(lm.num_elements());
  for (int e = 0; e < lm.num_elements(); ++e) {
    int t = lm.elems[e];
    out.coeff[e] = mt.bubble_moment(t) * 60.0 / h.area(t);
  }
  return out;
}

P0Fn bubble_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi) {
  return bubble_dual_apply(h, level, MomentTable(h, phi));
}

P1DiscFn p_dual_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant) {
  ensure_dual_constants();
  require(level >= 0 && level <= mt.source_level(), "p_dual_apply: level out of range");
  const LevelMesh& lm = h.level(level);
  Workspace w;
  gather_vertex_weights(h, level, mt, all_vertices(lm), w);
  P1DiscFn out;
  out.level = level;
  out.values.assign(3 * lm.num_elements(), 0.0);
  eval_p_dual_on(h, level, mt, variant, w, all_elements(lm), out);
  return out;
}

P1DiscFn p_dual_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant) {
  return p_dual_apply(h, level, MomentTable(h, phi), variant);
}

P0Fn q_apply(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant) {
  return p1disc_mean(p_dual_apply(h, level, mt, variant));
}

P0Fn q_apply(const MeshHierarchy& h, int level, const P0Fn& phi, Variant variant) {
  return q_apply(h, level, MomentTable(h, phi), variant);
}

MlDifference ml_difference(const MeshHierarchy& h, int level, const MomentTable& mt, Variant variant,
                           bool localized) {
  ensure_dual_constants();
  require(level >= 0 && level <= mt.source_level(), "ml_difference: level out of range");
  const LevelMesh& lm = h.level(level);
  MlDifference out;
  out.diff.level = level;
  out.diff.values.assign(3 * lm.num_elements(), 0.0);
  out.active.assign(lm.num_elements(), 0);

  if (level == 0) {
    // P'_{-1} = 0 by convention: the difference is P'_0 phi itself.
    Workspace w;
    gather_vertex_weights(h, 0, mt, all_vertices(lm), w);
    eval_p_dual_on(h, 0, mt, variant, w, all_elements(lm), out.diff);
    std::fill(out.active.begin(), out.active.end(), 1);
    out.active_count = lm.num_elements();
    return out;
  }

  std::vector<int> mask;
  if (localized) {
    std::vector<int> fresh;
    for (int e = 0; e < lm.num_elements(); ++e)
      if (h.forest()[lm.elems[e]].birth_level == level) fresh.push_back(e);
    if (static_cast<int>(fresh.size()) == lm.num_elements()) {
      mask = std::move(fresh);
    } else {
      mask = expand_patch(lm, fresh, 2);
    }
  } else {
    mask = all_elements(lm);
  }
  if (mask.empty()) return out;  // no refinement at this step: difference vanishes

  const LevelMesh& cm = h.level(level - 1);
  std::vector<char> coarse_flag(cm.num_elements(), 0);
  std::vector<int> coarse_mask;
  for (int e : mask) {
    int i = h.father(level, e);
    if (!coarse_flag[i]) {
      coarse_flag[i] = 1;
      coarse_mask.push_back(i);
    }
  }
  std::sort(coarse_mask.begin(), coarse_mask.end());

  Workspace wf, wc;
  gather_vertex_weights(h, level, mt, vertices_of_elements(h, lm, mask), wf);
  gather_vertex_weights(h, level - 1, mt, vertices_of_elements(h, cm, coarse_mask), wc);

  P1DiscFn fine_vals;
  fine_vals.level = level;
  fine_vals.values.assign(3 * lm.num_elements(), 0.0);
  eval_p_dual_on(h, level, mt, variant, wf, mask, fine_vals);

  P1DiscFn coarse_vals;
  coarse_vals.level = level - 1;
  coarse_vals.values.assign(3 * cm.num_elements(), 0.0);
  eval_p_dual_on(h, level - 1, mt, variant, wc, coarse_mask, coarse_vals);

  for (int e : mask) {
    int i = h.father(level, e);
    int tc = cm.elems[i];
    const double* u = coarse_vals.values.data() + 3 * i;
    const auto& vj = h.forest()[lm.elems[e]].v;
    for (int p = 0; p < 3; ++p) {
      auto [px, py] = h.vertex_xy(vj[p]);
      auto lam = barycentric(h, tc, px, py);
      double coarse_at = lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2];
      out.diff.values[3 * e + p] = fine_vals.values[3 * e + p] - coarse_at;
    }
    out.active[e] = 1;
    OpCounter::add(1);
  }
  out.active_count = static_cast<long long>(mask.size());
  return out;
}

}  // namespace negsob
