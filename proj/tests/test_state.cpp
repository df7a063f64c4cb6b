#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "coagdiff/state.hpp"

using namespace coagdiff;

namespace {

ClassField random_field(const SpatialGrid& g, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  ClassField f(g, classes);
  for (double& x : f.raw()) x = u(rng);
  return f;
}

}  // namespace

TEST_SUITE("state") {
  TEST_CASE("grid geometry") {
    const SpatialGrid g(2, 4, 2.0);
    CHECK(g.spacing() == 0.5);
    CHECK(g.cell_count() == 16);
    CHECK(g.cell_volume() == 0.25);
    for (std::size_t c = 0; c < g.cell_count(); ++c) CHECK(g.ravel(g.unravel(c)) == c);
    CHECK(g.unravel(1)[0] == 1);
    CHECK(g.unravel(4)[1] == 1);
    CHECK(g.center(0) == 0.25);
    CHECK_THROWS_AS(SpatialGrid(0, 4, 1.0), ShapeError);
    CHECK_THROWS_AS(SpatialGrid(4, 4, 1.0), ShapeError);
    CHECK_THROWS_AS(SpatialGrid(1, 0, 1.0), ShapeError);
    CHECK_THROWS_AS(SpatialGrid(1, 4, 0.0), ShapeError);
  }

  TEST_CASE("bracket examples") {
    const SpatialGrid g(1, 3, 1.0);
    ClassField k(g, 2);
    k.at(1, 1) = 3.0;
    const std::vector<double> zero(2, 0.0);
    for (double x : bracket(zero, k)) CHECK(x == 0.0);
    const std::vector<double> f = {2.0, 0.0};
    CHECK(bracket(f, k)[1] == 6.0);
    CHECK_THROWS_AS(bracket(std::vector<double>{1.0}, k), ShapeError);
  }

  TEST_CASE("es bracket at classes 1 and 8") {
    const Model es = build_es_model(8, 1.0);
    const SpatialGrid g(1, 1, 1.0);
    ClassField k(g, 8);
    k.at(1, 0) = 1.0;
    k.at(8, 0) = 1.0;
    const double w8 = 1.0 / 2.0 + 2.0;
    CHECK(bracket(weights(es, 8), k)[0] == doctest::Approx(2.0 + w8).epsilon(1e-14));
  }

  TEST_CASE("norms") {
    const SpatialGrid g(1, 4, 1.0);
    const std::vector<double> zero(4, 0.0), two(4, 2.0), ind = {0.0, 1.0, 0.0, 0.0};
    CHECK(norm_l1(zero, g) == 0.0);
    CHECK(norm_inf(zero) == 0.0);
    CHECK(norm_l1(two, g) == 2.0);
    CHECK(norm_inf(two) == 2.0);
    CHECK(norm_l1(ind, g) == 0.25);
  }

  TEST_CASE("total mass examples") {
    const Model model = build_constant_model(3, 0.5, 1.0, 1.0, 2);
    const SpatialGrid g(2, 4, 2.0);
    ClassField k(g, 3);
    CHECK(total_mass(k, model) == 0.0);
    k.at(1, 5) = 1.0;
    CHECK(total_mass(k, model) == doctest::Approx(0.5 * g.cell_volume()).epsilon(1e-15));
    ClassField mono(g, 3);
    for (double& x : mono.cls(1)) x = 3.0;
    CHECK(total_mass(mono, model) == doctest::Approx(3.0 * 4.0 * 0.5).epsilon(1e-14));
  }

  TEST_CASE("dominating measure examples") {
    const SpatialGrid g(1, 5, 1.0);
    ClassField flat(g, 2);
    for (double& x : flat.cls(1)) x = 0.7;
    for (double& x : flat.cls(2)) x = 0.2;
    const auto d = dominating_measure(flat);
    CHECK(d[0] == 0.7);
    CHECK(d[1] == 0.2);
    ClassField bump(g, 1);
    bump.at(1, 2) = 4.0;
    CHECK(dominating_measure(bump)[0] == 4.0);
    ClassField two(g, 1);
    two.at(1, 1) = 1.0;
    two.at(1, 3) = 3.0;
    CHECK(dominating_measure(two)[0] == 3.0);
  }

  TEST_CASE("alpha and horizon") {
    const Model es = build_es_model(8, 1.0);
    const Horizon none = alpha_and_horizon(es, DominatingMeasure(16, 0.0));
    CHECK(none.alpha == 0.0);
    CHECK(std::isinf(none.zeta_lower));
    DominatingMeasure mono(16, 0.0);
    mono[0] = 1.0;
    const Horizon h = alpha_and_horizon(es, mono);
    CHECK(h.alpha == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(h.zeta_lower == doctest::Approx(0.25).epsilon(1e-15));
    mono[7] = 1.0;
    CHECK(alpha_and_horizon(es, mono).alpha == doctest::Approx(4.0 + 6.25).epsilon(1e-14));
  }

  TEST_CASE("defect state caches eta") {
    const Model es = build_es_model(4, 1.0);
    const SpatialGrid g(1, 3, 1.0);
    DefectState lam(g, es);
    for (double x : lam.eta()) CHECK(x == 0.0);
    lam.modify([](ClassField& d) {
      d.at(1, 0) = 1.0;
      d.at(8, 2) = 2.0;
    });
    CHECK(lam.eta()[0] == doctest::Approx(es.weight(1)).epsilon(1e-15));
    CHECK(lam.eta()[1] == 0.0);
    CHECK(lam.eta()[2] == doctest::Approx(2.0 * es.weight(8)).epsilon(1e-15));
    CHECK_THROWS_AS(DefectState(ClassField(g, 3), es), ShapeError);
  }

  TEST_CASE("property: bracket is linear") {
    const SpatialGrid g(2, 5, 1.0);
    const ClassField k = random_field(g, 6, 1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> f(6), h(6), fh(6);
      for (int i = 0; i < 6; ++i) {
        f[static_cast<std::size_t>(i)] = u(rng);
        h[static_cast<std::size_t>(i)] = u(rng);
        fh[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(i)] + h[static_cast<std::size_t>(i)];
      }
      const auto a = bracket(f, k), b = bracket(h, k), c = bracket(fh, k);
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(c[i] - (a[i] + b[i])) <= 1e-12 * std::max(1.0, std::abs(c[i])));
    }
  }

  TEST_CASE("property: l1 of the mass bracket equals total mass") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SpatialGrid g(1 + static_cast<int>(seed % 3), 4, 1.5);
      const Model model = build_es_model(5, 0.5);
      const ClassField k = random_field(g, 5, seed);
      const double a = norm_l1(bracket(masses(model, 5), k), g);
      CHECK(a == doctest::Approx(total_mass(k, model)).epsilon(1e-12));
    }
  }

  TEST_CASE("property: dominating measure dominates and alpha is monotone") {
    const Model es = build_es_model(4, 1.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SpatialGrid g(1, 7, 1.0);
      const ClassField k = random_field(g, 8, seed);
      const auto mu = dominating_measure(k);
      for (int c = 1; c <= 8; ++c)
        for (double x : k.cls(c)) CHECK(x <= mu[static_cast<std::size_t>(c - 1)]);
      auto nu = mu;
      for (std::size_t i = 0; i < nu.size(); i += 2) nu[i] += 0.1 * static_cast<double>(seed + 1);
      CHECK(alpha_and_horizon(es, mu).alpha <= alpha_and_horizon(es, nu).alpha);
    }
  }

  TEST_CASE("field predicates") {
    const SpatialGrid g(1, 2, 1.0);
    ClassField f(g, 2);
    CHECK(f.nonnegative());
    CHECK(f.finite());
    f.at(2, 1) = -1e-300;
    CHECK_FALSE(f.nonnegative());
    f.at(2, 1) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(f.finite());
    CHECK(f.same_shape(ClassField(g, 2)));
    CHECK_FALSE(f.same_shape(ClassField(g, 3)));
  }
}
