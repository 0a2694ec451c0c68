#include <doctest.h>

#include <cmath>
#include <random>

#include "negsob/fem_oracles.hpp"
#include "test_util.hpp"

using namespace negsob;
using testutil::random_p0;

namespace {

MeshHierarchy uniform_square(int levels) {
  auto h = MeshHierarchy::builtin("square2");
  for (int i = 0; i < levels; ++i) h.refine_uniform();
  return h;
}

}  // namespace

TEST_CASE("dual norm of a Haar atom sits in the expected scaling window") {
  auto h = uniform_square(2);
  DualNormSolver solver(h, Variant::plain, 1);
  const auto& lm = h.level(2);
  for (int fi : lm.interior_facets) {
    auto atom = haar_atom(h, 2, fi);
    auto f = haar_fn(h, 2, fi);
    double wnorm = std::sqrt(solver.dual_norm_sq(f.coeff));
    double surrogate = atom.facet_length * std::sqrt(haar_l2_norm_sq(h, atom));
    CHECK(wnorm / surrogate > 0.05);
    CHECK(wnorm / surrogate < 5.0);
  }
}

TEST_CASE("tilde dual norm of the constant is bounded by its L2 norm") {
  auto h = uniform_square(1);
  DualNormSolver solver(h, Variant::tilde, 1);
  std::vector<double> one(h.level(1).num_elements(), 1.0);
  double nrm = solver.dual_norm_sq(one);
  CHECK(nrm <= 1.0 + 1e-12);  // |Omega| = 1
  CHECK(nrm > 0.0);
}

TEST_CASE("oracle depth stability of the Gram diagonal") {
  // The discrete dual norm converges from below at roughly a factor of four
  // in the quadratic form per extra depth; element indicators are rough, so
  // one refinement step still moves their norms by up to ~20%. The checks
  // pin the measured behavior: bounded one-step movement, always upward.
  auto h = uniform_square(2);
  auto w1 = hminus1_gram(h, Variant::plain, 1);
  auto w2 = hminus1_gram(h, Variant::plain, 2);
  for (int i = 0; i < w1.rows(); ++i) {
    CHECK(std::abs(w2(i, i) - w1(i, i)) / w1(i, i) < 0.25);
    CHECK(w2(i, i) > 0.9 * w1(i, i));
  }
}

TEST_CASE("deeper oracle Grams are spectrally comparable") {
  auto h = uniform_square(2);
  auto w1 = hminus1_gram(h, Variant::plain, 1);
  auto w2 = hminus1_gram(h, Variant::plain, 2);
  auto eig = generalized_sym_eig(w1, w2);
  // from-below convergence: W_{M} <= W_{M+1} up to round-off, and the
  // least-resolved (oscillatory) modes carry at most a factor ~3 gap
  CHECK(eig.values.front() > 0.25);
  CHECK(eig.values.back() < 1.05);
}

TEST_CASE("interpolation norm endpoints") {
  auto h = uniform_square(2);
  std::mt19937_64 rng(3);
  for (Variant variant : {Variant::plain, Variant::tilde}) {
    NormOracle oracle(h, variant, 1);
    for (int rep = 0; rep < 10; ++rep) {
      auto phi = random_p0(h, 2, rng);
      double s0 = oracle.interp_norm_sq(phi, 0.0);
      double s1 = oracle.interp_norm_sq(phi, 1.0);
      CHECK(s0 == doctest::Approx(oracle.l2_norm_sq(phi.coeff)).epsilon(1e-10));
      CHECK(s1 == doctest::Approx(oracle.w_norm_sq(phi.coeff)).epsilon(1e-10));
      // log-convexity: ||phi||^2_{-1/2} <= ||phi||_{-1} ||phi||_{L2}
      double mid = oracle.interp_norm_sq(phi, 0.5);
      CHECK(mid <= std::sqrt(s1) * std::sqrt(s0) * (1.0 + 1e-12));
    }
    CHECK_THROWS_AS(oracle.interp_norm_sq(random_p0(h, 2, rng), 1.5), Error);
  }
}

TEST_CASE("interpolation norm of Haar atoms scales like h_E^s") {
  auto h = uniform_square(2);
  NormOracle oracle(h, Variant::plain, 1);
  for (double s : {0.25, 0.5, 0.75}) {
    for (int l : {1, 2}) {
      for (int fi : h.level(l).interior_facets) {
        auto atom = haar_atom(h, l, fi);
        auto f = haar_fn(h, l, fi);
        double nrm = oracle.interp_norm(f, s);
        double surrogate = std::pow(atom.facet_length, s) * std::sqrt(haar_l2_norm_sq(h, atom));
        CHECK(nrm / surrogate > 0.05);
        CHECK(nrm / surrogate < 5.0);
      }
    }
  }
}

TEST_CASE("dual projection fixes the subspace and satisfies Pythagoras") {
  auto h = uniform_square(2);
  NormOracle oracle(h, Variant::plain, 1);
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    auto coarse = random_p0(h, 1, rng);
    auto proj = oracle.project_dual(prolong_p0(h, coarse, 2), 1);
    for (int i = 0; i < h.level(1).num_elements(); ++i)
      CHECK(proj.coeff[i] == doctest::Approx(coarse.coeff[i]).epsilon(1e-9));

    auto phi = random_p0(h, 2, rng);
    auto p = oracle.project_dual(phi, 1);
    auto p2 = oracle.project_dual(prolong_p0(h, p, 2), 1);
    for (int i = 0; i < h.level(1).num_elements(); ++i)
      CHECK(p2.coeff[i] == doctest::Approx(p.coeff[i]).epsilon(1e-9));

    // ||phi||_W^2 = ||P phi||_W^2 + ||phi - P phi||_W^2
    auto pf = prolong_p0(h, p, 2);
    std::vector<double> diff(phi.coeff.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = phi.coeff[i] - pf.coeff[i];
    double total = oracle.w_norm_sq(phi.coeff);
    double a = oracle.w_norm_sq(pf.coeff);
    double b = oracle.w_norm_sq(diff);
    CHECK(total == doctest::Approx(a + b).epsilon(1e-10));
  }
}

TEST_CASE("mixed lift: zero right-hand side gives the zero field") {
  auto h = uniform_square(1);
  const auto& lm = h.level(1);
  std::vector<int> submesh{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<double> rhs(8, 0.0);
  auto r = mixed_lift(h, 1, submesh, rhs, {});
  CHECK(r.sigma_norm == doctest::Approx(0.0).epsilon(1e-14));
  for (double c : r.coeff) CHECK(std::abs(c) < 1e-13);
  (void)lm;
}

TEST_CASE("mixed lift reproduces a Haar atom from the single facet field") {
  auto h = uniform_square(1);
  const auto& lm = h.level(1);
  int fi = lm.interior_facets[0];
  auto atom = haar_atom(h, 1, fi);
  std::vector<int> submesh{atom.plus, atom.minus};
  // clamp everything except the shared facet
  std::vector<int> clamped;
  for (int e : submesh)
    for (int k = 0; k < 3; ++k)
      if (lm.elem_facets[e][k] != fi) clamped.push_back(lm.elem_facets[e][k]);
  std::vector<double> rhs{atom.weight_plus, atom.weight_minus};
  auto r = mixed_lift(h, 1, submesh, rhs, clamped);
  REQUIRE(r.dof_facets.size() == 1);
  CHECK(r.dof_facets[0] == fi);
  CHECK(r.coeff[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.div_residual < 1e-10);
}

TEST_CASE("mixed lift rejects incompatible and ill-posed inputs") {
  auto h = uniform_square(1);
  const auto& lm = h.level(1);
  int fi = lm.interior_facets[0];
  auto atom = haar_atom(h, 1, fi);
  std::vector<int> submesh{atom.plus, atom.minus};
  std::vector<int> clamped;
  for (int e : submesh)
    for (int k = 0; k < 3; ++k)
      if (lm.elem_facets[e][k] != fi) clamped.push_back(lm.elem_facets[e][k]);
  // nonzero mean with a fully clamped boundary
  std::vector<double> bad{1.0, 1.0};
  CHECK_THROWS_WITH_AS(mixed_lift(h, 1, submesh, bad, clamped), doctest::Contains("incompatible"), Error);
  // unclamped relative-boundary facet
  std::vector<double> ok{atom.weight_plus, atom.weight_minus};
  CHECK_THROWS_WITH_AS(mixed_lift(h, 1, submesh, ok, {}), doctest::Contains("must be clamped"), Error);
  // disconnected submesh: two elements not sharing an edge
  int far = -1;
  for (int e = 0; e < lm.num_elements(); ++e) {
    bool adjacent = false;
    for (int k = 0; k < 3; ++k) {
      const Facet& f = lm.facets[lm.elem_facets[e][k]];
      if (f.plus == atom.plus || f.minus == atom.plus) adjacent = true;
    }
    if (!adjacent && e != atom.plus) {
      far = e;
      break;
    }
  }
  REQUIRE(far >= 0);
  std::vector<double> rhs2{1.0, -1.0};
  CHECK_THROWS_WITH_AS(mixed_lift(h, 1, {atom.plus, far}, rhs2, {}), doctest::Contains("connected"), Error);
}

TEST_CASE("mixed lift energy stays proportional to diam * rhs across levels") {
  auto h = uniform_square(3);
  std::mt19937_64 rng(11);
  std::vector<double> constants;
  for (int l = 1; l <= 3; ++l) {
    // lift a zero-mean right-hand side on the children of coarse element 0
    const auto& kids = h.children(l - 1, 0);
    std::vector<int> submesh(kids.begin(), kids.end());
    std::vector<double> rhs(submesh.size());
    double mean = 0.0, area = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      rhs[i] = (i % 2 == 0) ? 1.0 : -1.0;
      mean += rhs[i] * h.elem_area(l, submesh[i]);
      area += h.elem_area(l, submesh[i]);
    }
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= mean / area;
    const auto& lm = h.level(l);
    std::vector<int> clamped;
    std::vector<char> insub(lm.num_elements(), 0);
    for (int e : submesh) insub[e] = 1;
    for (int e : submesh)
      for (int k = 0; k < 3; ++k) {
        const Facet& f = lm.facets[lm.elem_facets[e][k]];
        int other = (f.plus == e) ? f.minus : f.plus;
        if (other < 0 || !insub[other]) clamped.push_back(lm.elem_facets[e][k]);
      }
    auto r = mixed_lift(h, l, submesh, rhs, clamped);
    CHECK(r.div_residual < 1e-10);
    double rhs_l2 = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs_l2 += rhs[i] * rhs[i] * h.elem_area(l, submesh[i]);
    double diam = h.elem_diameter(l - 1, 0);
    constants.push_back(r.sigma_norm / (diam * std::sqrt(rhs_l2)));
  }
  for (double c : constants) {
    CHECK(c > 0.0);
    CHECK(c < 2.0);
  }
  CHECK(*std::max_element(constants.begin(), constants.end()) /
            *std::min_element(constants.begin(), constants.end()) <
        2.0);
}
