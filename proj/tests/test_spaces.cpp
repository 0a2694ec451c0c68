#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "negsob/spaces.hpp"
#include "test_util.hpp"

using namespace negsob;
using testutil::quad3;
using testutil::random_p0;

namespace {

// Hat function of local vertex k of a coarse element, as a closure.
std::function<double(double, double)> hat_of(const MeshHierarchy& h, int tree_id, int k) {
  return [&h, tree_id, k](double x, double y) { return barycentric(h, tree_id, x, y)[k]; };
}

// Finest-level tree ids below a level-local element.
std::set<int> descendant_leaves(const MeshHierarchy& h, int level, int local, int fine_level) {
  std::set<int> out;
  std::vector<int> cur{local};
  for (int l = level; l < fine_level; ++l) {
    std::vector<int> next;
    for (int i : cur)
      for (int j : h.children(l, i)) next.push_back(j);
    cur = std::move(next);
  }
  for (int i : cur) out.insert(h.level(fine_level).elems[i]);
  return out;
}

}  // namespace

TEST_CASE("haar atom on the square diagonal") {
  auto h = MeshHierarchy::builtin("square2");
  const auto& lm = h.level(0);
  REQUIRE(lm.interior_facets.size() == 1);
  int fi = lm.interior_facets[0];
  auto atom = haar_atom(h, 0, fi);
  CHECK(atom.facet_length == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(atom.weight_plus == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(atom.weight_minus == doctest::Approx(-2.0 * std::sqrt(2.0)).epsilon(1e-15));
  // zero mean, exactly
  CHECK(atom.weight_plus * h.elem_area(0, atom.plus) + atom.weight_minus * h.elem_area(0, atom.minus) == 0.0);
  auto f = haar_fn(h, 0, fi);
  P0Fn one{0, {1.0, 1.0}};
  CHECK(l2_inner_p0(h, f, one) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(haar_l2_norm_sq(h, atom) == doctest::Approx(8.0).epsilon(1e-14));  // 2*(2sqrt2)^2*(1/2)
}

TEST_CASE("haar atom on a boundary facet") {
  auto h = MeshHierarchy::builtin("square2");
  const auto& lm = h.level(0);
  int fi = lm.boundary_facets[0];
  auto atom = haar_atom(h, 0, fi);
  CHECK(atom.minus == -1);
  CHECK(atom.weight_minus == 0.0);
  CHECK(atom.weight_plus == doctest::Approx(1.0 / 0.5).epsilon(1e-15));
  // boundary atom mean = |E|
  auto f = haar_fn(h, 0, fi);
  P0Fn one{0, {1.0, 1.0}};
  CHECK(l2_inner_p0(h, f, one) == doctest::Approx(atom.facet_length).epsilon(1e-14));
}

TEST_CASE("interior atoms have zero mean on all levels") {
  auto h = MeshHierarchy::builtin("lshape6");
  h.refine_uniform();
  h.refine_adaptive(h.level(1).vertex_elems[0]);
  for (int l = 0; l < h.num_levels(); ++l) {
    P0Fn one{l, std::vector<double>(h.level(l).num_elements(), 1.0)};
    for (int fi : h.level(l).interior_facets) {
      auto f = haar_fn(h, l, fi);
      CHECK(std::abs(l2_inner_p0(h, f, one)) < 1e-13);
    }
  }
}

TEST_CASE("tilde facet sets equal the full sets on uniform hierarchies") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_uniform();
  auto ts = tilde_facet_sets(h);
  for (int l = 0; l <= 2; ++l) {
    CHECK(static_cast<int>(ts.reduced[l].size()) == h.level(l).num_facets());
    CHECK(ts.reduced_interior[l].size() == h.level(l).interior_facets.size());
  }
}

TEST_CASE("no-op refinement contributes an empty reduced set") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_adaptive({});
  auto ts = tilde_facet_sets(h);
  CHECK(ts.reduced[1].empty());
  // every facet re-associates to level 0
  for (int fi = 0; fi < h.level(1).num_facets(); ++fi) CHECK(ts.assoc_level[1][fi] == 0);
}

TEST_CASE("reduced sets match a brute-force support comparison") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_adaptive({0});
  const int L = h.finest_level();
  auto ts = tilde_facet_sets(h);
  const auto& fine = h.level(L);
  const auto& coarse = h.level(L - 1);
  std::map<std::pair<int, int>, int> coarse_of;
  for (int fi = 0; fi < coarse.num_facets(); ++fi)
    coarse_of[{coarse.facets[fi].v[0], coarse.facets[fi].v[1]}] = fi;
  int excluded = 0;
  for (int fi = 0; fi < fine.num_facets(); ++fi) {
    const Facet& f = fine.facets[fi];
    auto it = coarse_of.find({f.v[0], f.v[1]});
    bool expect;
    if (it == coarse_of.end()) {
      expect = true;
    } else {
      const Facet& cf = coarse.facets[it->second];
      std::set<int> sup_new = descendant_leaves(h, L, f.plus, L);
      std::set<int> sup_old = descendant_leaves(h, L - 1, cf.plus, L);
      if (!f.boundary()) {
        auto s2 = descendant_leaves(h, L, f.minus, L);
        sup_new.insert(s2.begin(), s2.end());
        auto s3 = descendant_leaves(h, L - 1, cf.minus, L);
        sup_old.insert(s3.begin(), s3.end());
      }
      bool subset = std::includes(sup_old.begin(), sup_old.end(), sup_new.begin(), sup_new.end());
      expect = subset && sup_new.size() < sup_old.size();
      REQUIRE(subset);  // supports can only shrink
    }
    CHECK(static_cast<bool>(ts.in_reduced[L][fi]) == expect);
    if (!expect) ++excluded;
  }
  CHECK(excluded > 0);  // the adaptive step leaves untouched facets out
}

TEST_CASE("prolongation is pointwise identity and norm preserving") {
  auto h = MeshHierarchy::builtin("square2");
  for (int i = 0; i < 3; ++i) h.refine_uniform();
  P0Fn one{0, std::vector<double>(2, 1.0)};
  auto p = prolong_p0(h, one, 3);
  for (double c : p.coeff) CHECK(c == 1.0);

  P0Fn ind{0, {1.0, 0.0}};
  auto p1 = prolong_p0(h, ind, 1);
  int count = 0;
  for (double c : p1.coeff) count += (c == 1.0);
  CHECK(count == 4);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto f = random_p0(h, 1, rng);
    auto g = prolong_p0(h, f, 3);
    CHECK(l2_norm_sq_p0(h, g) == doctest::Approx(l2_norm_sq_p0(h, f)).epsilon(1e-13));
  }
}

TEST_CASE("transfer matrix rows are unit injections and compose to identity on constants") {
  auto h = MeshHierarchy::builtin("lshape6");
  h.refine_uniform();
  h.refine_uniform();
  for (int l = 0; l < 2; ++l) {
    auto t = transfer_matrix(h, l);
    CHECK(t.rows() == h.level(l + 1).num_elements());
    for (int i = 0; i < t.rows(); ++i) {
      CHECK(t.offsets()[i + 1] - t.offsets()[i] == 1);
      CHECK(t.values()[t.offsets()[i]] == 1.0);
    }
  }
  std::vector<double> c0(h.level(0).num_elements(), 3.5);
  auto c1 = transfer_matrix(h, 0).apply(c0);
  auto c2 = transfer_matrix(h, 1).apply(c1);
  for (double v : c2) CHECK(v == 3.5);
}

TEST_CASE("dual restriction is the transpose of prolongation") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_uniform();
  std::mt19937_64 rng(7);
  auto r = testutil::random_vector(h.level(2).num_elements(), rng);
  auto f = random_p0(h, 0, rng);
  auto rf = restrict_dual_p0(h, r, 2, 0);
  auto pf = prolong_p0(h, f, 2);
  CHECK(dot(rf, f.coeff) == doctest::Approx(dot(r, pf.coeff)).epsilon(1e-13));
}

TEST_CASE("P0 inner products are exact") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  P0Fn one0{0, {1.0, 1.0}};
  P0Fn one1{1, std::vector<double>(8, 1.0)};
  CHECK(l2_inner_p0(h, one0, one1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("P1 disc mass matrix is exact") {
  auto h = MeshHierarchy::builtin("square2");
  P1DiscFn v{0, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
  CHECK(l2_norm_sq_p1disc(h, v) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  // quadrature oracle on the same element: lambda^2 via degree-3 rule
  double q = quad3(h, h.level(0).elems[0], [&](double x, double y) {
    double l = barycentric(h, h.level(0).elems[0], x, y)[0];
    return l * l;
  });
  CHECK(q == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
}

TEST_CASE("p1 disc lift reproduces global linear functions") {
  auto h = MeshHierarchy::builtin("lshape6");
  h.refine_uniform();
  h.refine_adaptive({0, 3, 5});
  const int L = h.finest_level();
  P1DiscFn f{0, {}};
  f.values.resize(3 * h.level(0).num_elements());
  auto lin = [](double x, double y) { return 2.0 * x - 3.0 * y + 0.25; };
  for (int i = 0; i < h.level(0).num_elements(); ++i) {
    const auto& v = h.forest()[h.level(0).elems[i]].v;
    for (int k = 0; k < 3; ++k) {
      auto [x, y] = h.vertex_xy(v[k]);
      f.values[3 * i + k] = lin(x, y);
    }
  }
  auto g = lift_p1disc(h, f, L);
  for (int j = 0; j < h.level(L).num_elements(); ++j) {
    const auto& v = h.forest()[h.level(L).elems[j]].v;
    for (int k = 0; k < 3; ++k) {
      auto [x, y] = h.vertex_xy(v[k]);
      CHECK(g.values[3 * j + k] == doctest::Approx(lin(x, y)).epsilon(1e-13));
    }
  }
}

TEST_CASE("moment table: constants give |T|/3 hats and |T|/60 bubble") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_uniform();
  P0Fn one{2, std::vector<double>(h.level(2).num_elements(), 1.0)};
  MomentTable mt(h, one);
  for (int l = 0; l <= 2; ++l)
    for (int t : h.level(l).elems) {
      auto lm = mt.linear_moments(t);
      for (int k = 0; k < 3; ++k) CHECK(lm[k] == doctest::Approx(h.area(t) / 3.0).epsilon(1e-13));
      CHECK(mt.bubble_moment(t) == doctest::Approx(h.area(t) / 60.0).epsilon(1e-13));
      CHECK(mt.mean_moment(t) == doctest::Approx(h.area(t)).epsilon(1e-13));
    }
}

TEST_CASE("moment table matches brute-force quadrature for random data") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  h.refine_adaptive({0, 1, 2});
  h.refine_uniform();
  const int L = h.finest_level();
  std::mt19937_64 rng(11);
  auto phi = random_p0(h, L, rng);
  MomentTable mt(h, phi);
  for (int l = 0; l < L; ++l) {
    const auto& lm = h.level(l);
    for (int i = 0; i < lm.num_elements(); ++i) {
      int t = lm.elems[i];
      // brute force: sum over fine descendants with exact per-cell quadrature
      std::array<double, 3> hats{0, 0, 0};
      double bub = 0.0;
      std::vector<int> cur{i};
      for (int ll = l; ll < L; ++ll) {
        std::vector<int> next;
        for (int c : cur)
          for (int j : h.children(ll, c)) next.push_back(j);
        cur = std::move(next);
      }
      for (int j : cur) {
        int tk = h.level(L).elems[j];
        double c = phi.coeff[j];
        for (int k = 0; k < 3; ++k) hats[k] += c * quad3(h, tk, hat_of(h, t, k));
        bub += c * quad3(h, tk, [&](double x, double y) {
          auto lam = barycentric(h, t, x, y);
          return lam[0] * lam[1] * lam[2];
        });
      }
      auto got = mt.linear_moments(t);
      for (int k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(hats[k]).epsilon(1e-11));
      CHECK(mt.bubble_moment(t) == doctest::Approx(bub).epsilon(1e-11));
    }
  }
}

TEST_CASE("star basis invariants") {
  for (int p : {1, 2}) {
    auto b = star_basis_build(p);
    CHECK(b.dim == (p + 1) * (p + 2) / 2 - 1);
    // Gram identity and zero mean on the reference element
    for (int i = 0; i < b.dim; ++i) {
      double mean = 0.0;
      for (std::size_t k = 0; k < b.mono_coeffs[i].size(); ++k) mean += b.mono_coeffs[i][k] * b.mono_integrals[k];
      CHECK(std::abs(mean) < 1e-12);
      for (int j = 0; j < b.dim; ++j) {
        double g = 0.0;
        for (int a = 0; a < b.dim + 1; ++a)
          for (int c = 0; c < b.dim + 1; ++c) g += b.mono_coeffs[i][a] * b.mono_gram(a, c) * b.mono_coeffs[j][c];
        CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(star_basis_build(3), Error);
}

TEST_CASE("star split: constants have zero star part and round trips are exact") {
  auto h = MeshHierarchy::builtin("square2");
  h.refine_uniform();
  auto basis = star_basis_build(1);
  const int ne = h.level(1).num_elements();

  PpDiscFn constant{1, 1, std::vector<double>(3 * ne, 2.5)};
  auto sp = star_split(h, constant, basis);
  for (double c : sp.star_coeff) CHECK(std::abs(c) < 1e-13);
  for (double m : sp.mean.coeff) CHECK(m == doctest::Approx(2.5).epsilon(1e-13));

  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PpDiscFn f{1, 1, {}};
  f.values.resize(3 * ne);
  for (auto& v : f.values) v = gauss(rng);
  auto split = star_split(h, f, basis);
  auto rec = star_reconstruct(h, split, basis);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(rec.values[i] == doctest::Approx(f.values[i]).epsilon(1e-13));

  // mapped star functions: norm^2 = 2|T|, zero mean (spot check via quadrature)
  int t = h.level(1).elems[0];
  auto chi = [&](double x, double y) {
    auto lam = barycentric(h, t, x, y);
    double rx = lam[1], ry = lam[2];
    double s = 0.0;
    for (std::size_t k = 0; k < basis.mono_coeffs[0].size(); ++k) {
      static const int ex[3][2] = {{0, 0}, {1, 0}, {0, 1}};
      s += basis.mono_coeffs[0][k] * std::pow(rx, ex[k][0]) * std::pow(ry, ex[k][1]);
    }
    return s;
  };
  double nrm = quad3(h, t, [&](double x, double y) { return chi(x, y) * chi(x, y); });
  CHECK(nrm == doctest::Approx(2.0 * h.area(t)).epsilon(1e-12));
  double mean = quad3(h, t, chi);
  CHECK(std::abs(mean) < 1e-14);
}

TEST_CASE("star split p=2 round trip") {
  auto h = MeshHierarchy::builtin("square2");
  auto basis = star_basis_build(2);
  const int ne = h.level(0).num_elements();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PpDiscFn f{0, 2, {}};
  f.values.resize(6 * ne);
  for (auto& v : f.values) v = gauss(rng);
  auto split = star_split(h, f, basis);
  auto rec = star_reconstruct(h, split, basis);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(rec.values[i] == doctest::Approx(f.values[i]).epsilon(1e-12));
}
