#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "negsob/mesh.hpp"

using namespace negsob;

namespace {

// Marks every finest-level element whose closure contains the origin-corner
// vertex (vertex id 0 of the builtin meshes).
void refine_corner(MeshHierarchy& h, int steps, int corner_vertex = 0) {
  for (int s = 0; s < steps; ++s) {
    const LevelMesh& lm = h.level(h.finest_level());
    h.refine_adaptive(lm.vertex_elems[corner_vertex]);
  }
}

}  // namespace

TEST_CASE("square2 facet counts") {
  auto h = MeshHierarchy::builtin("square2");
  const auto& lm = h.level(0);
  CHECK(lm.num_elements() == 2);
  CHECK(lm.boundary_facets.size() == 4);
  CHECK(lm.interior_facets.size() == 1);
  CHECK(h.domain_area() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("single triangle has no interior facet") {
  auto h = MeshHierarchy::from_text("v 0 0\nv 1 0\nv 0 1\nt 0 1 2\n");
  CHECK(h.level(0).boundary_facets.size() == 3);
  CHECK(h.level(0).interior_facets.empty());
}

TEST_CASE("lshape6 satisfies the Euler identity") {
  auto h = MeshHierarchy::builtin("lshape6");
  const auto& lm = h.level(0);
  CHECK(lm.num_elements() == 6);
  int V = lm.num_vertices, E = lm.num_facets(), T = lm.num_elements();
  CHECK(V - E + T == 1);  // disk topology
  CHECK(3 * T == 2 * static_cast<int>(lm.interior_facets.size()) + static_cast<int>(lm.boundary_facets.size()));
  CHECK(h.domain_area() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("loader rejects bad meshes with entity ids") {
  CHECK_THROWS_WITH_AS(MeshHierarchy::from_text("v 0 0\nv 0 0\nv 1 0\nt 0 1 2\n"), doctest::Contains("duplicate"),
                       Error);
  CHECK_THROWS_WITH_AS(MeshHierarchy::from_text("v 0 0\nv 1 0\nv 2 0\nt 0 1 2\n"), doctest::Contains("zero-area"),
                       Error);
  // three triangles sharing the edge (0,1)
  CHECK_THROWS_WITH_AS(
      MeshHierarchy::from_text("v 0 0\nv 1 0\nv 0 1\nv 0 -1\nv -1 0.5\nt 0 1 2\nt 0 1 3\nt 0 1 4\n"),
      doctest::Contains("non-manifold"), Error);
  CHECK_THROWS_WITH_AS(MeshHierarchy::from_text("v 0 0\nv 1 0\nxyz\n"), doctest::Contains("line 3"), Error);
}

TEST_CASE("uniform refinement quadruples elements and splits facets") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  const auto& lm = h.level(1);
  CHECK(lm.num_elements() == 8);
  CHECK(lm.interior_facets.size() == 8);
  CHECK(lm.boundary_facets.size() == 8);
  h.refine_uniform();
  CHECK(h.level(2).num_elements() == 32);
}

TEST_CASE("child areas are exactly a quarter of the father") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_uniform();
  for (int l = 0; l + 1 < h.num_levels(); ++l) {
    for (int i = 0; i < h.level(l).num_elements(); ++i) {
      const auto& kids = h.children(l, i);
      REQUIRE(kids.size() == 4);
      for (int j : kids) CHECK(h.elem_area(l + 1, j) == h.elem_area(l, i) / 4.0);
    }
  }
}

TEST_CASE("uniform refinement halves diameters") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  for (int i = 0; i < h.level(0).num_elements(); ++i)
    for (int j : h.children(0, i)) CHECK(h.elem_diameter(1, j) == doctest::Approx(h.elem_diameter(0, i) / 2.0));
}

TEST_CASE("empty mark set copies the level") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_adaptive({});
  CHECK(h.level(1).num_elements() == 2);
  CHECK(h.level(1).elems == h.level(0).elems);
  for (int i = 0; i < 2; ++i) {
    CHECK(h.children(0, i).size() == 1);
    CHECK(!h.refined_at(0, i));
  }
}

TEST_CASE("marking one square triangle bisects the neighbor by closure") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_adaptive({0});
  // Both triangles have the diagonal as refinement edge, so the compatible
  // bisection splits both.
  CHECK(h.level(1).num_elements() == 4);
  auto rep = audit_hierarchy(h);
  CHECK(rep.pass());
}

TEST_CASE("iterated corner marking keeps the mesh regular") {
  auto h = MeshHierarchy::builtin("square2");
  refine_corner(h, 10);
  auto rep = audit_hierarchy(h);
  for (const auto& v : rep.violations) CAPTURE(v);
  CHECK(rep.pass());
  CHECK(rep.max_gen_spread >= 8);  // graded: generations spread apart
  CHECK(rep.max_gen_jump <= 2);
  CHECK(rep.min_gen_jump >= 1);
  CHECK(h.level(h.finest_level()).num_elements() > h.level(0).num_elements());
  CHECK(!h.is_uniform());
}

TEST_CASE("patches: stars and inclusion") {
  auto h = MeshHierarchy::builtin("square4");
  h.refine_uniform();
  const auto& lm = h.level(1);
  // center vertex of square4 is id 4 and interior
  CHECK(!lm.vertex_on_boundary[4]);
  auto star = vertex_patch(lm, 4, 1);
  CHECK(star == lm.vertex_elems[4]);

  auto h2 = MeshHierarchy::builtin("square2");
  auto both = element_patch(h2.level(0), 0, 1);
  CHECK(both == std::vector<int>({0, 1}));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    int z = static_cast<int>(rng() % lm.num_vertices);
    auto p1 = vertex_patch(lm, z, 1);
    auto p2 = vertex_patch(lm, z, 2);
    CHECK(std::includes(p2.begin(), p2.end(), p1.begin(), p1.end()));
  }
}

TEST_CASE("audit: uniform hierarchy invariants") {
  auto h = MeshHierarchy::builtin("square2");
  for (int i = 0; i < 3; ++i) h.refine_uniform();
  auto rep = audit_hierarchy(h);
  CHECK(rep.pass());
  CHECK(rep.gen_equals_two_level);
  CHECK(rep.max_area_rel_err < 1e-12);
  CHECK(rep.max_child_area_rel_err < 1e-12);
  // shape regularity stable across levels (similarity classes)
  CHECK(rep.c_reg / rep.c_reg_level_min < 1.01);
  // h_T vs q_ref^gen window
  CHECK(rep.href_ratio_max / rep.href_ratio_min < 4.0);
}

TEST_CASE("NVB produces finitely many similarity classes on the square") {
  auto h = MeshHierarchy::builtin("square2");
  for (int i = 0; i < 8; ++i) h.refine_uniform();
  std::set<std::array<long long, 3>> classes;
  for (int l = 0; l < h.num_levels(); ++l) {
    for (int t : h.level(l).elems) {
      const auto& v = h.forest()[t].v;
      std::array<double, 3> ang;
      for (int k = 0; k < 3; ++k) {
        auto [ax, ay] = h.vertex_xy(v[k]);
        auto [bx, by] = h.vertex_xy(v[(k + 1) % 3]);
        auto [cx, cy] = h.vertex_xy(v[(k + 2) % 3]);
        double ux = bx - ax, uy = by - ay, wx = cx - ax, wy = cy - ay;
        ang[k] = std::acos((ux * wx + uy * wy) / (std::hypot(ux, uy) * std::hypot(wx, wy)));
      }
      std::sort(ang.begin(), ang.end());
      classes.insert({llround(ang[0] * 1e6), llround(ang[1] * 1e6), llround(ang[2] * 1e6)});
    }
  }
  CHECK(classes.size() <= 16);
}

TEST_CASE("mesh writer round-trips") {
  auto h = MeshHierarchy::builtin("lshape6");
  h.refine_uniform();
  std::string text = write_mesh_text(h, 1);
  auto h2 = MeshHierarchy::from_text(text);
  CHECK(h2.level(0).num_elements() == h.level(1).num_elements());
  CHECK(h2.level(0).interior_facets.size() == h.level(1).interior_facets.size());
  CHECK(h2.domain_area() == doctest::Approx(h.domain_area()).epsilon(1e-14));
  // forced `r 0` preserves the refinement edges: next uniform level matches
  h2.refine_uniform();
  h.refine_uniform();
  CHECK(h2.level(1).num_elements() == h.level(2).num_elements());
}

TEST_CASE("adaptive marking out of range is rejected") {
  auto h = MeshHierarchy::builtin("square2");
  CHECK_THROWS_AS(h.refine_adaptive({7}), Error);
}
