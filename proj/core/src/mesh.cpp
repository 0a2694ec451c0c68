#include "negsob/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "negsob/common.hpp"

namespace negsob {

namespace {

constexpr double kAreaTol = 1e-14;

double signed_area(const Vertex& a, const Vertex& b, const Vertex& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double dist(const Vertex& a, const Vertex& b) { return std::hypot(b.x - a.x, b.y - a.y); }

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

ParsedMesh parse_mesh_text(std::string_view text) {
  ParsedMesh out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y;
      if (!(ls >> x >> y)) fail("mesh parse error at line " + std::to_string(lineno) + ": expected `v <x> <y>`");
      if (!std::isfinite(x) || !std::isfinite(y))
        fail("mesh parse error at line " + std::to_string(lineno) + ": non-finite coordinate");
      out.vertices.push_back({x, y});
    } else if (tag == "t") {
      int i, j, k;
      if (!(ls >> i >> j >> k))
        fail("mesh parse error at line " + std::to_string(lineno) + ": expected `t <i> <j> <k>`");
      int redge = -1;
      std::string suffix;
      if (ls >> suffix) {
        if (suffix != "r" || !(ls >> redge) || redge < 0 || redge > 2)
          fail("mesh parse error at line " + std::to_string(lineno) + ": expected `r <0|1|2>` suffix");
      }
      out.triangles.push_back({i, j, k});
      out.forced_refinement_edge.push_back(redge);
    } else {
      fail("mesh parse error at line " + std::to_string(lineno) + ": unknown tag `" + tag + "`");
    }
  }
  return out;
}

MeshHierarchy MeshHierarchy::from_text(std::string_view text) { return from_parsed(parse_mesh_text(text)); }

MeshHierarchy MeshHierarchy::from_parsed(const ParsedMesh& parsed) {
  MeshHierarchy h;
  h.vertices_ = parsed.vertices;
  const int nv = static_cast<int>(h.vertices_.size());
  require(nv >= 3, "load_initial_mesh: fewer than 3 vertices");
  require(!parsed.triangles.empty(), "load_initial_mesh: no triangles");

  {
    std::map<std::pair<double, double>, int> seen;
    for (int i = 0; i < nv; ++i) {
      auto [it, fresh] = seen.insert({{h.vertices_[i].x, h.vertices_[i].y}, i});
      if (!fresh)
        fail("load_initial_mesh: duplicate vertices " + std::to_string(it->second) + " and " + std::to_string(i));
    }
  }

  for (std::size_t e = 0; e < parsed.triangles.size(); ++e) {
    auto tri = parsed.triangles[e];
    for (int k : tri)
      require(k >= 0 && k < nv, "load_initial_mesh: vertex index out of range in triangle " + std::to_string(e));
    double sa = signed_area(h.vertices_[tri[0]], h.vertices_[tri[1]], h.vertices_[tri[2]]);
    if (std::abs(sa) <= kAreaTol) fail("load_initial_mesh: zero-area triangle " + std::to_string(e));
    if (sa < 0.0) std::swap(tri[1], tri[2]);  // enforce ccw

    int redge = parsed.forced_refinement_edge[e];
    if (redge < 0) {
      // Longest edge; ties broken by the smallest opposite-vertex id.
      double best = -1.0;
      for (int k = 0; k < 3; ++k) {
        double len = dist(h.vertices_[tri[k]], h.vertices_[tri[(k + 1) % 3]]);
        bool better = len > best + kAreaTol;
        bool tie = redge >= 0 && std::abs(len - best) <= kAreaTol && tri[(k + 2) % 3] < tri[(redge + 2) % 3];
        if (better || tie) {
          best = len;
          redge = k;
        }
      }
    }
    TreeElement te;
    te.v = {tri[redge % 3], tri[(redge + 1) % 3], tri[(redge + 2) % 3]};
    te.gen = 0;
    te.birth_level = 0;
    h.forest_.push_back(te);
    h.area_.push_back(std::abs(signed_area(h.vertices_[te.v[0]], h.vertices_[te.v[1]], h.vertices_[te.v[2]])));
    double d01 = dist(h.vertices_[te.v[0]], h.vertices_[te.v[1]]);
    double d12 = dist(h.vertices_[te.v[1]], h.vertices_[te.v[2]]);
    double d20 = dist(h.vertices_[te.v[2]], h.vertices_[te.v[0]]);
    h.diam_.push_back(std::max({d01, d12, d20}));
  }
  h.domain_area_ = 0.0;
  for (double a : h.area_) h.domain_area_ += a;

  std::vector<int> elems(h.forest_.size());
  for (std::size_t i = 0; i < elems.size(); ++i) elems[i] = static_cast<int>(i);
  h.push_level(std::move(elems), nv);
  return h;
}

MeshHierarchy MeshHierarchy::builtin(const std::string& name) {
  if (name == "square2") {
    return from_text(
        "v 0 0\nv 1 0\nv 1 1\nv 0 1\n"
        "t 0 1 2\nt 0 2 3\n");
  }
  if (name == "square4") {
    return from_text(
        "v 0 0\nv 1 0\nv 1 1\nv 0 1\nv 0.5 0.5\n"
        "t 0 1 4\nt 1 2 4\nt 2 3 4\nt 3 0 4\n");
  }
  if (name == "lshape6") {
    // (-1,1)^2 minus the closed quadrant [0,1] x [-1,0]; fan around the
    // re-entrant corner (0,0).
    return from_text(
        "v 0 0\nv 1 0\nv 1 1\nv 0 1\nv -1 1\nv -1 0\nv -1 -1\nv 0 -1\n"
        "t 0 1 2\nt 0 2 3\nt 0 3 4\nt 0 4 5\nt 0 5 6\nt 0 6 7\n");
  }
  fail("unknown builtin mesh `" + name + "` (expected square2, square4, or lshape6)");
}

const LevelMesh& MeshHierarchy::level(int l) const {
  require(l >= 0 && l < num_levels(), "mesh level " + std::to_string(l) + " out of range");
  return levels_[l];
}

int MeshHierarchy::midpoint_of(int a, int b) {
  auto key = edge_key(a, b);
  auto it = midpoints_.find(key);
  if (it != midpoints_.end()) return it->second;
  Vertex m{0.5 * (vertices_[a].x + vertices_[b].x), 0.5 * (vertices_[a].y + vertices_[b].y)};
  int id = static_cast<int>(vertices_.size());
  vertices_.push_back(m);
  midpoints_.emplace(key, id);
  return id;
}

int MeshHierarchy::bisect_one(int tree_id, int next_level) {
  int a = forest_[tree_id].v[0], b = forest_[tree_id].v[1], c = forest_[tree_id].v[2];
  int gen = forest_[tree_id].gen;
  int m = midpoint_of(a, b);
  TreeElement c1, c2;
  c1.v = {c, a, m};
  c2.v = {b, c, m};
  c1.gen = c2.gen = gen + 1;
  c1.father = c2.father = tree_id;
  c1.birth_level = c2.birth_level = next_level;
  int id1 = static_cast<int>(forest_.size());
  forest_.push_back(c1);
  forest_.push_back(c2);
  forest_[tree_id].child = {id1, id1 + 1};
  forest_[tree_id].death_level = next_level;
  for (int id : {id1, id1 + 1}) {
    const auto& e = forest_[id];
    area_.push_back(std::abs(signed_area(vertices_[e.v[0]], vertices_[e.v[1]], vertices_[e.v[2]])));
    double d01 = dist(vertices_[e.v[0]], vertices_[e.v[1]]);
    double d12 = dist(vertices_[e.v[1]], vertices_[e.v[2]]);
    double d20 = dist(vertices_[e.v[2]], vertices_[e.v[0]]);
    diam_.push_back(std::max({d01, d12, d20}));
  }
  return id1;
}

void MeshHierarchy::refine_uniform() {
  const int next = num_levels();
  std::vector<int> base = levels_.back().elems;
  for (int t : base) {
    int c1 = bisect_one(t, next);
    bisect_one(c1, next);  // transient children, empty alive window
    bisect_one(c1 + 1, next);
  }
  std::vector<int> alive;
  alive.reserve(base.size() * 4);
  for (int t : base)
    for (int c : forest_[t].child)
      for (int g : forest_[c].child) alive.push_back(g);
  push_level(std::move(alive), static_cast<int>(vertices_.size()));
}

void MeshHierarchy::refine_adaptive(const std::vector<int>& marked) {
  const int next = num_levels();
  const std::vector<int> base = levels_.back().elems;
  const int ne = static_cast<int>(base.size());
  for (int m : marked)
    require(m >= 0 && m < ne, "refine_adaptive: marked element " + std::to_string(m) + " out of range");
  uniform_ = uniform_ && marked.empty();

  if (!marked.empty()) {
    // Dynamic edge adjacency over the working (alive) element set.
    std::unordered_map<std::pair<int, int>, std::array<int, 2>, PairHash> edge_elems;
    edge_elems.reserve(base.size() * 2);
    auto insert_edge = [&](int a, int b, int t) {
      auto key = edge_key(a, b);
      auto it = edge_elems.find(key);
      if (it == edge_elems.end()) {
        edge_elems.emplace(key, std::array<int, 2>{t, -1});
      } else {
        require(it->second[1] < 0, "refine_adaptive: non-manifold edge during refinement");
        it->second[1] = t;
      }
    };
    auto remove_edge = [&](int a, int b, int t) {
      auto it = edge_elems.find(edge_key(a, b));
      if (it == edge_elems.end()) return;
      if (it->second[0] == t) {
        it->second[0] = it->second[1];
        it->second[1] = -1;
      } else if (it->second[1] == t) {
        it->second[1] = -1;
      }
      if (it->second[0] < 0) edge_elems.erase(it);
    };

    for (int t : base) {
      const auto& e = forest_[t];
      insert_edge(e.v[0], e.v[1], t);
      insert_edge(e.v[1], e.v[2], t);
      insert_edge(e.v[2], e.v[0], t);
    }

    long long budget = 64LL * ne;
    auto alive = [&](int t) { return forest_[t].is_leaf(); };
    auto bisect_adaptive = [&](int t) {
      const auto v = forest_[t].v;
      remove_edge(v[0], v[1], t);
      remove_edge(v[1], v[2], t);
      remove_edge(v[2], v[0], t);
      int c1 = bisect_one(t, next);
      for (int c : {c1, c1 + 1}) {
        const auto& e = forest_[c];
        insert_edge(e.v[0], e.v[1], c);
        insert_edge(e.v[1], e.v[2], c);
        insert_edge(e.v[2], e.v[0], c);
      }
      if (--budget < 0) fail("refine_adaptive: closure failed to terminate (corrupted refinement-edge data?)");
    };

    std::vector<int> sorted_marked(marked);
    std::sort(sorted_marked.begin(), sorted_marked.end());
    sorted_marked.erase(std::unique(sorted_marked.begin(), sorted_marked.end()), sorted_marked.end());

    std::vector<int> stack;
    for (int m : sorted_marked) {
      int t0 = base[m];
      if (!alive(t0)) continue;
      stack.assign(1, t0);
      while (!stack.empty()) {
        int t = stack.back();
        if (!alive(t)) {
          stack.pop_back();
          continue;
        }
        const auto v = forest_[t].v;
        auto key = edge_key(v[0], v[1]);
        int other = -1;
        if (auto it = edge_elems.find(key); it != edge_elems.end()) {
          if (it->second[0] >= 0 && it->second[0] != t) other = it->second[0];
          if (it->second[1] >= 0 && it->second[1] != t) other = it->second[1];
        }
        if (other < 0) {
          bisect_adaptive(t);
          stack.pop_back();
        } else if (edge_key(forest_[other].v[0], forest_[other].v[1]) == key) {
          bisect_adaptive(t);
          bisect_adaptive(other);
          stack.pop_back();
        } else {
          stack.push_back(other);
        }
      }
    }
  }

  std::vector<int> next_elems;
  next_elems.reserve(base.size() + 8);
  // Depth-first emission keeps sibling order deterministic.
  std::vector<int> dfs;
  for (int t : base) {
    dfs.assign(1, t);
    while (!dfs.empty()) {
      int u = dfs.back();
      dfs.pop_back();
      if (forest_[u].is_leaf()) {
        next_elems.push_back(u);
      } else {
        dfs.push_back(forest_[u].child[1]);
        dfs.push_back(forest_[u].child[0]);
      }
    }
  }
  push_level(std::move(next_elems), static_cast<int>(vertices_.size()));
}

void MeshHierarchy::push_level(std::vector<int> elems, int num_vertices) {
  LevelMesh lm;
  lm.level = num_levels();
  lm.num_vertices = num_vertices;
  lm.elems = std::move(elems);
  build_level_tables(lm);
  levels_.push_back(std::move(lm));

  if (num_levels() >= 2) {
    const LevelMesh& coarse = levels_[num_levels() - 2];
    const LevelMesh& fine = levels_.back();
    std::unordered_map<int, int> local_of_tree;
    local_of_tree.reserve(fine.elems.size() * 2);
    for (int i = 0; i < fine.num_elements(); ++i) local_of_tree.emplace(fine.elems[i], i);

    std::vector<std::vector<int>> cmap(coarse.num_elements());
    std::vector<int> fmap(fine.num_elements(), -1);
    std::vector<int> dfs;
    for (int i = 0; i < coarse.num_elements(); ++i) {
      dfs.assign(1, coarse.elems[i]);
      while (!dfs.empty()) {
        int u = dfs.back();
        dfs.pop_back();
        auto it = local_of_tree.find(u);
        if (it != local_of_tree.end()) {
          cmap[i].push_back(it->second);
          fmap[it->second] = i;
        } else {
          require(!forest_[u].is_leaf(), "push_level: dangling element in the forest");
          dfs.push_back(forest_[u].child[1]);
          dfs.push_back(forest_[u].child[0]);
        }
      }
      std::sort(cmap[i].begin(), cmap[i].end());
    }
    child_map_.push_back(std::move(cmap));
    father_map_.push_back(std::move(fmap));
  }
}

void MeshHierarchy::build_level_tables(LevelMesh& lm) const {
  const int ne = lm.num_elements();
  lm.elem_facets.assign(ne, {-1, -1, -1});
  std::unordered_map<std::pair<int, int>, int, PairHash> facet_of;
  facet_of.reserve(ne * 2);
  for (int i = 0; i < ne; ++i) {
    const auto& v = forest_[lm.elems[i]].v;
    for (int k = 0; k < 3; ++k) {
      auto key = edge_key(v[k], v[(k + 1) % 3]);
      auto it = facet_of.find(key);
      if (it == facet_of.end()) {
        Facet f;
        f.v = {key.first, key.second};
        f.plus = i;
        lm.elem_facets[i][k] = static_cast<int>(lm.facets.size());
        facet_of.emplace(key, static_cast<int>(lm.facets.size()));
        lm.facets.push_back(f);
      } else {
        Facet& f = lm.facets[it->second];
        if (f.minus >= 0)
          fail("mesh: non-manifold edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
        f.minus = i;
        lm.elem_facets[i][k] = it->second;
      }
    }
  }
  lm.vertex_on_boundary.assign(lm.num_vertices, 0);
  for (int fi = 0; fi < lm.num_facets(); ++fi) {
    const Facet& f = lm.facets[fi];
    if (f.boundary()) {
      lm.boundary_facets.push_back(fi);
      lm.vertex_on_boundary[f.v[0]] = 1;
      lm.vertex_on_boundary[f.v[1]] = 1;
    } else {
      lm.interior_facets.push_back(fi);
    }
  }
  for (int z = 0; z < lm.num_vertices; ++z)
    (lm.vertex_on_boundary[z] ? lm.boundary_vertices : lm.interior_vertices).push_back(z);
  lm.vertex_elems.assign(lm.num_vertices, {});
  for (int i = 0; i < ne; ++i)
    for (int vid : forest_[lm.elems[i]].v) lm.vertex_elems[vid].push_back(i);
}

std::vector<int> expand_patch(const LevelMesh& mesh, const std::vector<int>& elems, int times) {
  std::vector<int> cur(elems);
  std::sort(cur.begin(), cur.end());
  cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
  for (int r = 0; r < times; ++r) {
    std::set<int> verts;
    for (int e : cur)
      for (int k = 0; k < 3; ++k) {
        const Facet& f = mesh.facets[mesh.elem_facets[e][k]];
        verts.insert(f.v[0]);
        verts.insert(f.v[1]);
      }
    std::set<int> grown(cur.begin(), cur.end());
    for (int z : verts)
      for (int e : mesh.vertex_elems[z]) grown.insert(e);
    cur.assign(grown.begin(), grown.end());
  }
  return cur;
}

std::vector<int> vertex_patch(const LevelMesh& mesh, int vertex_id, int order) {
  require(vertex_id >= 0 && vertex_id < mesh.num_vertices,
          "vertex_patch: unknown vertex " + std::to_string(vertex_id));
  return expand_patch(mesh, mesh.vertex_elems[vertex_id], order - 1);
}

std::vector<int> element_patch(const LevelMesh& mesh, int elem, int order) {
  require(elem >= 0 && elem < mesh.num_elements(), "element_patch: unknown element " + std::to_string(elem));
  return expand_patch(mesh, {elem}, order);
}

AuditReport audit_hierarchy(const MeshHierarchy& h) {
  AuditReport rep;
  rep.href_ratio_min = 1e300;
  rep.href_ratio_max = 0.0;
  double creg_level_min = 1e300;
  const double omega = h.domain_area();

  for (int l = 0; l < h.num_levels(); ++l) {
    const LevelMesh& lm = h.level(l);
    double area_sum = 0.0, creg_level = 0.0;
    int gen_min = 1 << 30, gen_max = 0;
    for (int i = 0; i < lm.num_elements(); ++i) {
      int t = lm.elems[i];
      double a = h.area(t), d = h.diameter(t);
      area_sum += a;
      creg_level = std::max(creg_level, d * d / a);
      double ratio = d / std::pow(h.q_ref(), h.forest()[t].gen);
      rep.href_ratio_min = std::min(rep.href_ratio_min, ratio);
      rep.href_ratio_max = std::max(rep.href_ratio_max, ratio);
      gen_min = std::min(gen_min, h.forest()[t].gen);
      gen_max = std::max(gen_max, h.forest()[t].gen);
      if (h.is_uniform() && h.forest()[t].gen != 2 * l) {
        rep.gen_equals_two_level = false;
        rep.violations.push_back("uniform hierarchy but gen != 2*level for element " + std::to_string(i) +
                                 " at level " + std::to_string(l));
      }
    }
    rep.c_reg = std::max(rep.c_reg, creg_level);
    creg_level_min = std::min(creg_level_min, creg_level);
    rep.max_gen_spread = std::max(rep.max_gen_spread, gen_max - gen_min);
    double err = std::abs(area_sum - omega) / omega;
    rep.max_area_rel_err = std::max(rep.max_area_rel_err, err);
    if (err > 1e-12)
      rep.violations.push_back("area sum off by " + fmt_double(err) + " at level " + std::to_string(l));
    if (3 * lm.num_elements() !=
        2 * static_cast<int>(lm.interior_facets.size()) + static_cast<int>(lm.boundary_facets.size())) {
      rep.facet_identity_ok = false;
      rep.violations.push_back("facet identity 3#T = 2#E_int + #E_bnd fails at level " + std::to_string(l));
    }
    for (int fi : lm.interior_facets)
      if (lm.facets[fi].plus == lm.facets[fi].minus) {
        rep.facet_identity_ok = false;
        rep.violations.push_back("interior facet " + std::to_string(fi) +
                                 " with identical incident elements at level " + std::to_string(l));
      }
  }
  rep.c_reg_level_min = creg_level_min;

  rep.min_gen_jump = 1 << 30;
  bool any_jump = false;
  for (int l = 0; l + 1 < h.num_levels(); ++l) {
    const LevelMesh& coarse = h.level(l);
    const LevelMesh& fine = h.level(l + 1);
    for (int i = 0; i < coarse.num_elements(); ++i) {
      const auto& kids = h.children(l, i);
      double asum = 0.0;
      for (int j : kids) asum += h.elem_area(l + 1, j);
      double err = std::abs(asum - h.elem_area(l, i)) / h.elem_area(l, i);
      rep.max_child_area_rel_err = std::max(rep.max_child_area_rel_err, err);
      if (err > 1e-12)
        rep.violations.push_back("child areas fail to partition element " + std::to_string(i) + " at level " +
                                 std::to_string(l));
      if (kids.size() > 1) {
        for (int j : kids) {
          int dg = h.forest()[fine.elems[j]].gen - h.forest()[coarse.elems[i]].gen;
          rep.max_gen_jump = std::max(rep.max_gen_jump, dg);
          rep.min_gen_jump = std::min(rep.min_gen_jump, dg);
          any_jump = true;
          if (dg < 1)
            rep.violations.push_back("generation did not increase for a child of element " + std::to_string(i) +
                                     " at level " + std::to_string(l));
        }
      }
    }
  }
  if (!any_jump) rep.min_gen_jump = 0;
  return rep;
}

std::string write_mesh_text(const MeshHierarchy& h, int l) {
  const LevelMesh& lm = h.level(l);
  std::string out = "# level " + std::to_string(l) + "\n";
  for (int i = 0; i < lm.num_vertices; ++i)
    out += "v " + fmt_double(h.vertices()[i].x) + " " + fmt_double(h.vertices()[i].y) + "\n";
  for (int i = 0; i < lm.num_elements(); ++i) {
    const auto& v = h.forest()[lm.elems[i]].v;
    out += "t " + std::to_string(v[0]) + " " + std::to_string(v[1]) + " " + std::to_string(v[2]) + " r 0\n";
  }
  return out;
}

}  // namespace negsob
