#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "negsob/common.hpp"

namespace negsob {

struct Vertex {
  double x = 0.0, y = 0.0;
};

/// Element of the persistent bisection forest. Vertices are global ids,
/// counterclockwise, ordered so that the newest-vertex-bisection reference
/// edge is (v[0], v[1]) and v[2] is the newest vertex. Bisection of
/// T=(a,b,c) at the midpoint m of (a,b) produces (c,a,m) and (b,c,m), each
/// again with the reference edge first.
struct TreeElement {
  std::array<int, 3> v{-1, -1, -1};
  int gen = 0;
  int father = -1;
  std::array<int, 2> child{-1, -1};
  int birth_level = 0;
  // Level at which the element was refined away; alive at level l iff
  // birth_level <= l < death_level. Transient nodes created inside a
  // double-bisection step have an empty window.
  int death_level = kNeverDies;

  static constexpr int kNeverDies = 1 << 30;
  bool is_leaf() const { return child[0] < 0; }
};

struct Facet {
  std::array<int, 2> v{-1, -1};  // sorted global vertex ids
  int plus = -1;                 // level-local element index T_E^+
  int minus = -1;                // level-local element index T_E^-, -1 on the boundary
  bool boundary() const { return minus < 0; }
};

/// One level of the hierarchy. Immutable after construction; element
/// indices are level-local positions into elems, vertex ids are global.
struct LevelMesh {
  int level = 0;
  int num_vertices = 0;              // prefix length of MeshHierarchy::vertices
  std::vector<int> elems;            // tree ids; level-local index = position
  std::vector<Facet> facets;
  std::vector<int> interior_facets;
  std::vector<int> boundary_facets;
  std::vector<int> interior_vertices;
  std::vector<int> boundary_vertices;
  std::vector<char> vertex_on_boundary;          // indexed by global vertex id
  std::vector<std::array<int, 3>> elem_facets;   // facet id on local edge k=(v_k, v_{k+1})
  std::vector<std::vector<int>> vertex_elems;    // incident elements per global vertex id, ascending

  int num_elements() const { return static_cast<int>(elems.size()); }
  int num_facets() const { return static_cast<int>(facets.size()); }
};

struct ParsedMesh {
  std::vector<Vertex> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> forced_refinement_edge;  // -1 when not forced
};

/// Parses the mesh text format: `v <x> <y>` lines, then `t <i> <j> <k>`
/// lines with an optional `r <local-edge>` suffix; `#` starts a comment.
ParsedMesh parse_mesh_text(std::string_view text);

struct AuditReport;

class MeshHierarchy {
 public:
  /// Builds the level-0 mesh from parsed text. The reference edge of each
  /// initial element is its longest edge, ties broken by the smallest
  /// opposite-vertex id, unless forced by an `r` suffix.
  static MeshHierarchy from_parsed(const ParsedMesh& parsed);
  static MeshHierarchy from_text(std::string_view text);
  /// Builtins: square2 (unit square, 2 triangles), square4 (unit square,
  /// 4 triangles around the center), lshape6 (L-shape, 6 triangles).
  static MeshHierarchy builtin(const std::string& name);

  /// Appends one uniform level: every element is bisected twice (4
  /// children, generation +2, diameters halved).
  void refine_uniform();

  /// Appends one adaptive level: newest vertex bisection of the marked
  /// elements (level-local ids on the finest level) plus closure. An empty
  /// mark set copies the level.
  void refine_adaptive(const std::vector<int>& marked);

  int num_levels() const { return static_cast<int>(levels_.size()); }
  int finest_level() const { return num_levels() - 1; }
  const LevelMesh& level(int l) const;
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<TreeElement>& forest() const { return forest_; }
  bool is_uniform() const { return uniform_; }
  /// Bisection factor of (A2): h scales by q_ref per generation.
  double q_ref() const { return 0.70710678118654752; }

  double area(int tree_id) const { return area_[tree_id]; }
  double diameter(int tree_id) const { return diam_[tree_id]; }
  double elem_area(int l, int local) const { return area_[levels_[l].elems[local]]; }
  double elem_diameter(int l, int local) const { return diam_[levels_[l].elems[local]]; }
  double domain_area() const { return domain_area_; }

  /// Level-(l+1) local descendants of a level-l local element (singleton
  /// when the element is carried over).
  const std::vector<int>& children(int l, int local) const { return child_map_[l][local]; }
  /// Level-l local father of a level-(l+1) local element.
  int father(int lp1, int local) const { return father_map_[lp1 - 1][local]; }
  /// True when the level-l local element is bisected on the way to l+1.
  bool refined_at(int l, int local) const { return child_map_[l][local].size() > 1; }

  std::array<double, 2> vertex_xy(int vid) const { return {vertices_[vid].x, vertices_[vid].y}; }

 private:
  MeshHierarchy() = default;
  void build_level_tables(LevelMesh& lm) const;
  void push_level(std::vector<int> elems, int num_vertices);
  int midpoint_of(int a, int b);
  int bisect_one(int tree_id, int next_level);

  std::vector<Vertex> vertices_;
  std::vector<TreeElement> forest_;
  std::vector<double> area_, diam_;  // per tree element
  std::vector<LevelMesh> levels_;
  std::vector<std::vector<std::vector<int>>> child_map_;  // [l][local] -> locals at l+1
  std::vector<std::vector<int>> father_map_;              // [l][local at l+1] -> local at l
  double domain_area_ = 0.0;
  bool uniform_ = true;
  // edge -> midpoint vertex id; persistent across refinement calls (an edge
  // is bisected at most once over the whole history).
  struct PairHash {
    std::size_t operator()(const std::pair<int, int>& p) const {
      return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ p.second);
    }
  };
  std::unordered_map<std::pair<int, int>, int, PairHash> midpoints_;
};

/// omega^{(order)} of a vertex: the elements whose closure meets the
/// closure of the order-(order-1) patch domain (order 1 = the vertex star).
std::vector<int> vertex_patch(const LevelMesh& mesh, int vertex_id, int order = 1);

/// omega^{(order)} of an element (order 1 = elements touching its closure).
std::vector<int> element_patch(const LevelMesh& mesh, int elem, int order = 1);

/// Grows a set of elements by `times` rings of closure-touching elements.
std::vector<int> expand_patch(const LevelMesh& mesh, const std::vector<int>& elems, int times);

struct AuditReport {
  double c_reg = 0.0;                 // max diam(T)^2/|T|
  double c_reg_level_min = 0.0;       // min over levels of the per-level max
  double max_area_rel_err = 0.0;      // | sum |T| - |Omega| | / |Omega| per level
  double max_child_area_rel_err = 0.0;
  double href_ratio_min = 0.0, href_ratio_max = 0.0;  // h_T / q_ref^gen(T)
  int max_gen_jump = 0;               // max gen(T) - gen(father) per level step
  int min_gen_jump = 0;
  bool gen_equals_two_level = true;   // uniform hierarchies: gen(T) = 2*level
  bool facet_identity_ok = true;      // 3#T = 2#E_int + #E_bnd at every level
  int max_gen_spread = 0;             // max over levels of (max gen - min gen)
  std::vector<std::string> violations;
  bool pass() const { return violations.empty(); }
};

/// Checks (A1)-(A3) style properties over the whole hierarchy and reports
/// the observed constants.
AuditReport audit_hierarchy(const MeshHierarchy& h);

/// Writes the level in the same text format the parser accepts, prefixed
/// with a `# level <l>` header.
std::string write_mesh_text(const MeshHierarchy& h, int l);

}  // namespace negsob
