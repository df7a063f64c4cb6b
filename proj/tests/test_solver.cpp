#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coagdiff/oracles.hpp"
#include "coagdiff/solver.hpp"

using namespace coagdiff;

namespace {

ClassField uniform(const SpatialGrid& g, int m, int cls, double density) {
  ClassField f(g, m);
  for (double& x : f.cls(cls)) x = density;
  return f;
}

ClassField wavy(const SpatialGrid& g, int m) {
  ClassField f(g, m);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    const double x = g.center(g.unravel(c)[0]) / g.length();
    f.at(1, c) = 0.5 + 0.2 * std::sin(2.0 * std::numbers::pi * x);
    if (m >= 2) f.at(2, c) = 0.1 + 0.05 * std::cos(2.0 * std::numbers::pi * x);
  }
  return f;
}

double combined_mass(const ClassField& kappa, const ClassField& lambda, const Model& model) {
  return total_mass(kappa, model) + total_mass(lambda, model);
}

double l1(const ClassField& a, const ClassField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.raw().size(); ++i) s += std::abs(a.raw()[i] - b.raw()[i]);
  return s * a.grid().cell_volume();
}

Scenario constant_bump(int m) {
  const SpatialGrid g(1, 16, 1.0);
  Scenario s = Scenario::with_initial(build_constant_model(m, 1.0, 1.0, 0.1, 1), g, wavy(g, m), 0.01, 0.5);
  s.cadence = 5;
  return s;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("scenario validation") {
    const SpatialGrid g(1, 4, 1.0);
    const Model es = build_es_model(4, 1.0);
    Scenario s = Scenario::with_initial(es, g, uniform(g, 4, 1, 1.0), 0.1, 1.0);
    CHECK_NOTHROW(s.validate());
    CHECK(s.steps() == 10);
    s.t_end = 0.25;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.t_end = 0.0;
    CHECK_NOTHROW(s.validate());
    CHECK(s.steps() == 0);
    s.dt = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.dt = 0.1;
    s.kappa0.at(1, 0) = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    Scenario wrong = Scenario::with_initial(es, g, uniform(g, 3, 1, 1.0), 0.1, 1.0);
    CHECK_THROWS_AS(wrong.validate(), std::invalid_argument);
  }

  TEST_CASE("t_end = 0 keeps the initial state") {
    const SpatialGrid g(1, 4, 1.0);
    Scenario s = Scenario::with_initial(build_es_model(4, 1.0), g, uniform(g, 4, 1, 1.0), 0.1, 0.0);
    const RunResult r = run(s);
    REQUIRE(r.trajectory.times.size() == 1);
    CHECK(r.trajectory.kappa[0].raw() == s.kappa0.raw());
    CHECK(r.diagnostics.rows.size() == 1);
  }

  TEST_CASE("zero kernel step is pure diffusion for both integrators") {
    const SpatialGrid g(1, 32, 1.0);
    const Model zero = build_constant_model(3, 1.0, 0.0, 0.5, 1);
    const ClassField k = wavy(g, 3);
    const ClassField l(g, 6);
    const DefectState lam(l, zero);
    const PropagatorTable t = build_propagator(g, zero, 0.01);
    const StepResult a = step_strang(k, lam, zero, t, 0.01);
    const StepResult b = step_duhamel(k, lam, zero, t, 0.01);
    const ClassField dk = diffuse(k, t), dl = diffuse(l, t);
    CHECK(a.kappa.raw() == dk.raw());
    CHECK(a.lambda.density().raw() == dl.raw());
    CHECK(b.kappa.raw() == dk.raw());
    CHECK(b.lambda.density().raw() == dl.raw());
  }

  TEST_CASE("single cell: diffusion is the identity and the step tracks the ode") {
    const SpatialGrid g(1, 1, 1.0);
    const Model one = build_constant_model(16, 1.0, 1.0, 1.0, 1);
    const PropagatorTable t = build_propagator(g, one, 0.01);
    for (int k = 1; k <= 32; ++k) CHECK(t.row(k)[0] == 1.0);
    const ClassField k0 = uniform(g, 16, 1, 1.0);
    std::vector<double> errors;
    for (double dt : {0.02, 0.01}) {
      const PropagatorTable tab = build_propagator(g, one, dt);
      ClassField k = k0;
      DefectState lam(g, one);
      for (int n = 0; n < static_cast<int>(std::lround(0.2 / dt)); ++n) {
        StepResult r = step_strang(k, lam, one, tab, dt);
        k = r.kappa;
        lam = r.lambda;
      }
      const Reference ref = homogeneous_ode(one, {1.0}, 0.2, 1e-4, 2000);
      double e = 0.0;
      for (int c = 1; c <= 16; ++c) e += std::abs(k.at(c, 0) - ref.values.back().at(c, 0));
      errors.push_back(e);
    }
    CHECK(errors[0] < 1e-4);
    CHECK(std::log2(errors[0] / errors[1]) >= 1.8);
  }

  TEST_CASE("combined mass is conserved by a step") {
    const SpatialGrid g(1, 16, 1.0);
    const Model es = build_es_model(6, 1.0);
    ClassField k = wavy(g, 6);
    for (double& x : k.cls(5)) x = 0.3;
    DefectState lam(g, es);
    const PropagatorTable t = build_propagator(g, es, 0.01);
    const double before = combined_mass(k, lam.density(), es);
    for (int n = 0; n < 20; ++n) {
      StepResult r = step_strang(k, lam, es, t, 0.01);
      k = r.kappa;
      lam = r.lambda;
      CHECK(combined_mass(k, lam.density(), es) == doctest::Approx(before).epsilon(1e-12));
    }
    for (int n = 0; n < 20; ++n) {
      StepResult r = step_duhamel(k, lam, es, t, 0.01);
      k = r.kappa;
      lam = r.lambda;
      CHECK(combined_mass(k, lam.density(), es) == doctest::Approx(before).epsilon(1e-12));
    }
  }

  TEST_CASE("duhamel and strang agree to second order") {
    const SpatialGrid g(1, 32, 1.0);
    const Model es = build_es_model(8, 1.0);
    const ClassField k0 = wavy(g, 8);
    std::vector<double> gaps;
    for (int n : {5, 10, 20}) {
      const double dt = 0.1 / n;
      const PropagatorTable t = build_propagator(g, es, dt);
      ClassField ka = k0, kb = k0;
      DefectState la(g, es), lb(g, es);
      for (int s = 0; s < n; ++s) {
        StepResult a = step_strang(ka, la, es, t, dt);
        StepResult b = step_duhamel(kb, lb, es, t, dt, {1e-14, 100, {}, {}});
        ka = a.kappa;
        la = a.lambda;
        kb = b.kappa;
        lb = b.lambda;
      }
      gaps.push_back(l1(ka, kb));
    }
    CHECK(std::log2(gaps[0] / gaps[1]) >= 1.5);
    CHECK(std::log2(gaps[1] / gaps[2]) >= 1.5);
  }

  TEST_CASE("picard iterates increase on the gain-only system") {
    const SpatialGrid g(1, 8, 1.0);
    const Model es = build_es_model(6, 1.0);
    const ClassField k0 = wavy(g, 6);
    const PropagatorTable t = build_propagator(g, es, 0.02);
    std::vector<ClassField> iterates;
    DuhamelOptions opt;
    opt.flux.gain_only = true;
    opt.on_iterate = [&](int, const ClassField& k) { iterates.push_back(k); };
    step_duhamel(k0, DefectState(g, es), es, t, 0.02, opt);
    REQUIRE(iterates.size() >= 3);
    for (std::size_t i = 1; i < iterates.size(); ++i)
      for (std::size_t j = 0; j < iterates[i].raw().size(); ++j)
        CHECK(iterates[i].raw()[j] >= iterates[i - 1].raw()[j] - 1e-15);
  }

  TEST_CASE("stability and convergence errors") {
    const SpatialGrid g(1, 4, 1.0);
    const Model es = build_es_model(4, 1.0);
    const ClassField k = uniform(g, 4, 1, 100.0);
    const DefectState lam(g, es);
    const PropagatorTable t = build_propagator(g, es, 0.01);
    CHECK_THROWS_AS(step_duhamel(k, lam, es, t, 0.01), StabilityError);
    CHECK_THROWS_AS(step_strang(k, lam, es, t, 0.01, {1, nullptr}), StabilityError);
    CHECK_NOTHROW(step_strang(k, lam, es, t, 0.01));
    const ClassField small = uniform(g, 4, 1, 1.0);
    CHECK_THROWS_AS(step_duhamel(small, lam, es, t, 0.01, {1e-16, 2, {}, {}}), ConvergenceError);
  }

  TEST_CASE("admissibility gate") {
    const SpatialGrid g(1, 4, 1.0);
    std::vector<double> a = {1, 2, 3, 4}, w = {4, 4, 4, 4};
    const Model bad = build_table_model(2, 1.0, 1, a, w, std::nullopt, std::vector<double>(16, 1.0));
    Scenario s = Scenario::with_initial(bad, g, uniform(g, 2, 1, 1.0), 0.01, 0.02);
    CHECK_THROWS_AS(run(s), AdmissibilityError);
    s.force = true;
    CHECK_NOTHROW(run(s));
  }

  TEST_CASE("es uniform run reports the horizon and keeps the global bound") {
    const SpatialGrid g(1, 4, 1.0);
    Scenario s = Scenario::with_initial(build_es_model(16, 1.0), g, uniform(g, 16, 1, 1.0), 0.01, 1.0);
    s.cadence = 10;
    const RunResult r = run(s);
    CHECK(r.diagnostics.horizon.alpha == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(r.diagnostics.horizon.zeta_lower == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.diagnostics.t_end_beyond_horizon);
    REQUIRE(r.diagnostics.growth_constant);
    CHECK(*r.diagnostics.growth_constant == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(r.diagnostics.global_bound_tripped);
    CHECK(r.trajectory.times.back() == doctest::Approx(1.0));
    CHECK(r.diagnostics.rows.size() == 11);
  }

  TEST_CASE("property: run invariants") {
    for (int variant = 0; variant < 3; ++variant) {
      const SpatialGrid g(1, 12, 1.0);
      const Model model = variant == 0   ? build_es_model(8, 1.0)
                          : variant == 1 ? build_constant_model(8, 1.0, 1.0, 0.2, 1)
                                         : build_es_model(4, 0.5);
      const int m = model.num_classes();
      Scenario s = Scenario::with_initial(model, g, wavy(g, m), 0.01, 0.6);
      s.integrator = variant == 2 ? Integrator::duhamel : Integrator::strang;
      s.cadence = 3;
      const RunResult r = run(s);
      const auto& rows = r.diagnostics.rows;
      const double total0 = rows[0].mass_mu + rows[0].mass_lambda;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].mass_mu + rows[i].mass_lambda == doctest::Approx(total0).epsilon(1e-12));
        CHECK(rows[i].clip_mass <= 1e-8 * total0);
        if (i > 0) {
          CHECK(rows[i].t > rows[i - 1].t);
          CHECK(rows[i].wmom_l1 <= rows[i - 1].wmom_l1 + 1e-10);
          CHECK(rows[i].mass_mu <= rows[i - 1].mass_mu + 1e-10 * total0);
        }
      }
      for (std::size_t t = 0; t < r.trajectory.times.size(); ++t) {
        const ClassField& k = r.trajectory.kappa[t];
        const ClassField& l = r.trajectory.lambda[t];
        CHECK(k.num_classes() == m);
        CHECK(l.num_classes() == 2 * m);
        CHECK(k.nonnegative());
        CHECK(l.nonnegative());
        // n = c m gives proportional totals
        const double c = 2.5;
        double n_tot = 0.0, m_tot = 0.0;
        for (int i = 1; i <= m; ++i)
          for (double x : k.cls(i)) {
            n_tot += c * model.mass(i) * x;
            m_tot += model.mass(i) * x;
          }
        for (int i = 1; i <= 2 * m; ++i)
          for (double x : l.cls(i)) {
            n_tot += c * model.mass(i) * x;
            m_tot += model.mass(i) * x;
          }
        CHECK(n_tot == doctest::Approx(c * m_tot).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("refine in M: zero kernel gives identical runs") {
    const SpatialGrid g(1, 8, 1.0);
    Scenario s = Scenario::with_initial(build_constant_model(8, 1.0, 0.0, 1.0, 1), g, wavy(g, 8), 0.01, 0.1);
    const MonotonicityReport rep = refine_in_M(s, {2, 4, 8});
    CHECK(rep.clean());
    for (const auto& p : rep.pairs) {
      CHECK(p.worst_kappa_excess == 0.0);
      CHECK(p.kappa_violations == 0);
    }
  }

  TEST_CASE("refine in M: constant kernel is monotone") {
    const Scenario s = constant_bump(16);
    const MonotonicityReport rep = refine_in_M(s, {4, 8, 16});
    CHECK(rep.clean());
    CHECK(rep.eta_decreasing);
    REQUIRE(rep.pairs.size() == 2);
    for (const auto& p : rep.pairs) {
      CHECK(p.kappa_violations == 0);
      CHECK(p.w_violations == 0);
    }
    for (std::size_t t = 0; t < rep.times.size(); ++t) {
      CHECK(rep.eta_l1[1][t] <= rep.eta_l1[0][t] + 1e-15);
      CHECK(rep.eta_l1[2][t] <= rep.eta_l1[1][t] + 1e-15);
    }
    CHECK_THROWS_AS(refine_in_M(s, {8, 4}), std::invalid_argument);
    CHECK_THROWS_AS(refine_in_M(s, {4, 32}), std::invalid_argument);
  }

  TEST_CASE("minimal iteration: zero kernel is reached at once") {
    const SpatialGrid g(1, 8, 1.0);
    Scenario s = Scenario::with_initial(build_constant_model(4, 1.0, 0.0, 1.0, 1), g, wavy(g, 4), 0.01, 0.1);
    const MinimalIterationResult r = minimal_iteration(s, {5, std::size_t{1} << 30});
    REQUIRE_FALSE(r.gap.empty());
    CHECK(r.gap[0] == 0.0);
    CHECK(r.iterates.size() == 1);
  }

  TEST_CASE("minimal iteration approaches the run from below") {
    const Scenario s = constant_bump(8);
    const MinimalIterationResult r = minimal_iteration(s, {30, std::size_t{1} << 30});
    REQUIRE(r.gap.size() >= 2);
    for (std::size_t k = 0; k < r.gap.size(); ++k) {
      CHECK(r.max_excess[k] <= 1e-12);
      if (k > 0) CHECK(r.gap[k] <= r.gap[k - 1]);
    }
    CHECK(r.gap.back() <= 1e-6);
  }

  TEST_CASE("minimal iteration storage guard") {
    const Scenario s = constant_bump(8);
    CHECK_THROWS_AS(minimal_iteration(s, {3, 1024}), StorageError);
  }

  TEST_CASE("weak residual: constant test function under pure diffusion") {
    const SpatialGrid g(1, 16, 1.0);
    const Model zero = build_constant_model(3, 1.0, 0.0, 0.5, 1);
    Scenario s = Scenario::with_initial(zero, g, wavy(g, 3), 0.01, 0.2);
    const RunResult r = run(s);
    ClassField f(g, 3);
    for (double& x : f.raw()) x = 1.7;
    for (double x : weak_residual(r.trajectory, f, zero)) CHECK(std::abs(x) <= 1e-12);
    ClassField beyond(g, 6);
    beyond.at(5, 0) = 1.0;
    CHECK_THROWS_AS(weak_residual(r.trajectory, beyond, zero), std::invalid_argument);
  }

  TEST_CASE("weak residual: mass test function") {
    const SpatialGrid g(1, 8, 1.0);
    const Model one = build_constant_model(64, 1.0, 1.0, 0.2, 1);
    Scenario s = Scenario::with_initial(one, g, wavy(g, 64), 0.01, 0.5);
    const RunResult r = run(s);
    ClassField f(g, 64);
    for (int k = 1; k <= 64; ++k)
      for (double& x : f.cls(k)) x = one.mass(k);
    for (double x : weak_residual(r.trajectory, f, one)) CHECK(std::abs(x) <= 1e-8);
  }
}
