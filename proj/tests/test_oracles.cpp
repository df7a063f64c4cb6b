#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coagdiff/heatflow.hpp"
#include "coagdiff/oracles.hpp"

using namespace coagdiff;

namespace {

// Closed form for K = 1, n_1(0) = 1.
double constant_kernel_density(int k, double t) {
  return std::pow(t / 2.0, k - 1) * std::pow(1.0 + t / 2.0, -k - 1);
}

double mass_of(const ClassField& f, const Model& model) {
  double s = 0.0;
  for (int k = 1; k <= f.num_classes(); ++k) s += model.mass(k) * f.at(k, 0);
  return s;
}

}  // namespace

TEST_SUITE("oracles") {
  TEST_CASE("closed form solves the constant-kernel system") {
    // residual of dn_k/dt = 1/2 sum n_i n_{k-i} - n_k sum n_j by central differences
    const double t = 0.7, h = 1e-5;
    for (int k = 1; k <= 12; ++k) {
      const double lhs = (constant_kernel_density(k, t + h) - constant_kernel_density(k, t - h)) / (2 * h);
      double g = 0.0, total = 0.0;
      for (int i = 1; i < k; ++i) g += constant_kernel_density(i, t) * constant_kernel_density(k - i, t);
      for (int j = 1; j <= 400; ++j) total += constant_kernel_density(j, t);
      CHECK(lhs == doctest::Approx(0.5 * g - constant_kernel_density(k, t) * total).epsilon(1e-7));
    }
  }

  TEST_CASE("zero kernel keeps n constant") {
    const Model zero = build_constant_model(4, 1.0, 0.0, 1.0, 1);
    const Reference ref = homogeneous_ode(zero, {0.3, 0.0, 1.2}, 1.0, 0.01, 10);
    CHECK(ref.provenance == "ode-rk4");
    for (const ClassField& f : ref.values) {
      CHECK(f.at(1, 0) == 0.3);
      CHECK(f.at(3, 0) == 1.2);
    }
  }

  TEST_CASE("constant kernel against the closed form") {
    const Model one = build_constant_model(32, 1.0, 1.0, 1.0, 1);
    const Reference ref = homogeneous_ode(one, {1.0}, 2.0, 1e-4, 1000);
    const ClassField& last = ref.values.back();
    CHECK(ref.times.back() == doctest::Approx(2.0));
    CHECK(last.at(1, 0) == doctest::Approx(0.25).epsilon(1e-10));
    double number = 0.0;
    for (int k = 1; k <= 64; ++k) {
      number += last.at(k, 0);
      CHECK(std::abs(last.at(k, 0) - constant_kernel_density(k, 2.0)) <= 1e-10);
    }
    CHECK(number == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("rk4 conserves mass") {
    const Model es = build_es_model(64, 1.0);
    const Reference ref = homogeneous_ode(es, {1.0}, 1.0, 1e-3, 100);
    const double m0 = mass_of(ref.values.front(), es);
    for (const ClassField& f : ref.values) CHECK(std::abs(mass_of(f, es) - m0) <= 1e-9 * m0);
  }

  TEST_CASE("blow-up guard") {
    const int m = 8;
    const std::size_t n = 2 * m;
    std::vector<double> masses(n), k(n * n);
    for (std::size_t i = 0; i < n; ++i) masses[i] = static_cast<double>(i + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k[i * n + j] = 1e8 * masses[i] * masses[j];
    const Model hot = build_table_model(m, 1.0, 1, std::vector<double>(n, 1.0), masses, std::nullopt, k);
    CHECK_THROWS_AS(homogeneous_ode(hot, {1e3}, 1.0, 0.1), OracleError);
    CHECK_THROWS_AS(homogeneous_ode(hot, std::vector<double>(20, 1.0), 1.0, 0.1), OracleError);
  }

  TEST_CASE("diffusion reference examples") {
    const SpatialGrid g(1, 64, 2.0);
    const std::array<double, 3> c{1.0, 0.0, 0.0};
    const Reference ref = diffusion_reference(g, 1.0, 0.1, {0.0, 0.04}, c);
    CHECK(ref.provenance == "closed-form");
    CHECK(ref.values[0].at(1, 32) == doctest::Approx(std::exp(-0.5 * std::pow(g.center(32) - 1.0, 2) / 0.01) /
                                                      std::sqrt(2 * std::numbers::pi * 0.01)).epsilon(1e-12));
    const double var = profile_variance(ref.values[1].cls(1), g, 1.0);
    CHECK(var == doctest::Approx(0.05).epsilon(1e-3));
    CHECK_THROWS_AS(diffusion_reference(g, 1.0, 0.1, {1.0}, c), OracleError);
  }

  TEST_CASE("diffusion reference semigroup") {
    const SpatialGrid g(1, 128, 4.0);
    const std::array<double, 3> c{2.0, 0.0, 0.0};
    const double a = 0.7, s0 = 0.2, t1 = 0.05, t2 = 0.08;
    const Reference direct = diffusion_reference(g, a, s0, {t1 + t2}, c);
    // reference at t1 is itself a Gaussian with variance s0^2 + a t1
    const Reference staged = diffusion_reference(g, a, std::sqrt(s0 * s0 + a * t1), {t2}, c);
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      CHECK(direct.values[0].at(1, i) == doctest::Approx(staged.values[0].at(1, i)).epsilon(1e-12));
  }

  TEST_CASE("cell averages carry the requested total") {
    for (int dim : {1, 2}) {
      const SpatialGrid g(dim, 32, 1.0);
      const auto v = gaussian_cell_average(g, 0.08, {0.3, 0.9, 0.0}, 2.5);
      double s = 0.0;
      for (double x : v) {
        CHECK(x >= 0.0);
        s += x;
      }
      CHECK(s * g.cell_volume() == doctest::Approx(2.5).epsilon(1e-13));
    }
  }

  TEST_CASE("compare examples") {
    const SpatialGrid g(1, 4, 1.0);
    ClassField f(g, 2);
    for (double& x : f.raw()) x = 1.0;
    const Reference a{"run", {0.0, 1.0}, {f, f}};
    const ErrorReport same = compare(a, a);
    CHECK(same.max_l1 == 0.0);
    CHECK(same.max_linf == 0.0);
    ClassField g2 = f;
    for (double& x : g2.cls(2)) x += 1e-3;
    const ErrorReport off = compare(a, Reference{"run", {0.0, 1.0}, {f, g2}});
    CHECK(off.linf[1] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(off.class_l1[1][0] == 0.0);
    CHECK(off.class_l1[1][1] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK_THROWS_AS(compare(a, Reference{"run", {0.0, 0.5}, {f, f}}), OracleError);
    CHECK_THROWS_AS(compare(a, Reference{"run", {0.0, 1.0}, {f, ClassField(SpatialGrid(1, 5, 1.0), 2)}}),
                    OracleError);
  }

  TEST_CASE("constant-kernel run matches the oracle") {
    const SpatialGrid g(1, 1, 1.0);
    const Model one = build_constant_model(32, 1.0, 1.0, 1.0, 1);
    ClassField k0(g, 32);
    k0.at(1, 0) = 1.0;
    Scenario s = Scenario::with_initial(one, g, k0, 1e-3, 1.0);
    s.cadence = 250;
    const RunResult r = run(s);
    const Reference ref = homogeneous_ode(one, {1.0}, 1.0, 1e-4, 2500);
    const ErrorReport rep = compare(to_reference(r.trajectory), ref);
    CHECK(rep.times.size() == 5);
    CHECK(rep.max_class_l1 <= 1e-4);
  }
}
