#include "coagdiff/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace coagdiff {

const char* to_string(Integrator integrator) {
  return integrator == Integrator::strang ? "strang" : "duhamel";
}

Scenario Scenario::with_initial(Model model, SpatialGrid grid, ClassField kappa0, double dt,
                                double t_end) {
  ClassField lambda0(grid, model.table_classes());
  return Scenario{std::move(model), grid, std::move(kappa0), std::move(lambda0), dt, t_end};
}

std::int64_t Scenario::steps() const {
  if (t_end <= 0.0) return 0;
  return static_cast<std::int64_t>(std::llround(t_end / dt));
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) fail("t_end must be >= 0");
  if (t_end > 0.0) {
    if (t_end < dt * (1.0 - 1e-12)) fail("t_end must be 0 or at least dt");
    const double n = t_end / dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      fail("t_end must be an integer multiple of dt");
  }
  if (cadence < 1) fail("cadence must be >= 1");
  if (picard_kmax < 1) fail("picard_kmax must be >= 1");
  if (!(picard_tol > 0.0)) fail("picard_tol must be positive");
  if (max_coag_substeps < 1) fail("max_coag_substeps must be >= 1");
  if (!(kappa0.grid() == grid) || !(lambda0.grid() == grid)) fail("initial data grid mismatch");
  if (kappa0.num_classes() != model.num_classes()) fail("kappa0 must span classes 1..M");
  if (lambda0.num_classes() != model.table_classes()) fail("lambda0 must span classes 1..2M");
  if (!kappa0.nonnegative() || !kappa0.finite()) fail("kappa0 must be finite and >= 0");
  if (!lambda0.nonnegative() || !lambda0.finite()) fail("lambda0 must be finite and >= 0");
}

namespace {

double clip_negative(ClassField& f, const Model& model) {
  double clipped = 0.0;
  for (int k = 1; k <= f.num_classes(); ++k) {
    double s = 0.0;
    for (double& x : f.cls(k)) {
      if (x < 0.0) {
        s -= x;
        x = 0.0;
      }
    }
    clipped += model.mass(k) * s;
  }
  return clipped * f.grid().cell_volume();
}

double sup_abs_diff(const ClassField& a, const ClassField& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.raw().size(); ++i) d = std::max(d, std::abs(a.raw()[i] - b.raw()[i]));
  return d;
}

double sup_abs(const ClassField& a) {
  double d = 0.0;
  for (double x : a.raw()) d = std::max(d, std::abs(x));
  return d;
}

// y + h * dy, elementwise
ClassField euler(const ClassField& y, const ClassField& dy, double h) {
  ClassField out(y.grid(), y.num_classes());
  for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] = y.raw()[i] + h * dy.raw()[i];
  return out;
}

ClassField average(const ClassField& a, const ClassField& b) {
  ClassField out(a.grid(), a.num_classes());
  for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] = 0.5 * (a.raw()[i] + b.raw()[i]);
  return out;
}

std::string stability_message(double cmax, double tau, int max_substeps) {
  std::ostringstream msg;
  msg << "stability precheck failed: c_max = " << cmax << " needs c_max*h <= " << kStabilityFactor
      << " over an interval of " << tau << " (more than " << max_substeps
      << " substeps); use dt <= " << kStabilityFactor / cmax;
  return msg.str();
}

// One SSP-RK2 coagulation substep of length h on (kappa, lambda).
void rk2_substep(ClassField& kappa, DefectState& lambda, const Model& model, double h,
                 RecordedSubstep* rec, double& clip) {
  const CoagFlux f0 = truncated_flux(kappa, lambda, model);
  if (rec) rec->c_stage0 = c_field(kappa, lambda, model);
  ClassField k1 = euler(kappa, f0.dkappa, h);
  DefectState l1(euler(lambda.density(), f0.dlambda, h), model);

  const CoagFlux f1 = truncated_flux(k1, l1, model);
  if (rec) rec->c_stage1 = c_field(k1, l1, model);
  const ClassField k2 = euler(k1, f1.dkappa, h);
  const ClassField l2 = euler(l1.density(), f1.dlambda, h);

  kappa = average(kappa, k2);
  clip += clip_negative(kappa, model);
  lambda.modify([&](ClassField& d) {
    d = average(d, l2);
    clip += clip_negative(d, model);
  });
}

int coag_half(ClassField& kappa, DefectState& lambda, const Model& model, double tau,
              int max_substeps, std::vector<RecordedSubstep>* record, double& clip) {
  const double cmax = c_max(kappa, lambda, model);
  const double needed = std::ceil(cmax * tau / kStabilityFactor);
  if (needed > max_substeps) throw StabilityError(stability_message(cmax, tau, max_substeps));
  const int n = std::max(1, static_cast<int>(needed));
  const double h = tau / n;
  for (int s = 0; s < n; ++s) {
    if (record) {
      RecordedSubstep rec{h, ClassField(kappa.grid(), 0), ClassField(kappa.grid(), 0)};
      rk2_substep(kappa, lambda, model, h, &rec, clip);
      record->push_back(std::move(rec));
    } else {
      rk2_substep(kappa, lambda, model, h, nullptr, clip);
    }
  }
  return n;
}

}  // namespace

StepResult step_strang(const ClassField& kappa, const DefectState& lambda, const Model& model,
                       const PropagatorTable& table, double dt, const StrangOptions& options) {
  StepResult r{kappa, lambda};
  std::vector<RecordedSubstep>* first = options.record ? &options.record->first_half : nullptr;
  std::vector<RecordedSubstep>* second = options.record ? &options.record->second_half : nullptr;
  r.substeps += coag_half(r.kappa, r.lambda, model, 0.5 * dt, options.max_substeps, first, r.clip_mass);
  r.kappa = diffuse(r.kappa, table);
  r.lambda.modify([&](ClassField& d) { d = diffuse(d, table); });
  r.substeps += coag_half(r.kappa, r.lambda, model, 0.5 * dt, options.max_substeps, second, r.clip_mass);
  return r;
}

StepResult step_duhamel(const ClassField& kappa, const DefectState& lambda, const Model& model,
                        const PropagatorTable& table, double dt, const DuhamelOptions& options) {
  const double cmax = c_max(kappa, lambda, model);
  if (cmax * dt > kStabilityFactor) throw StabilityError(stability_message(cmax, dt, 1));

  const CoagFlux fn = truncated_flux(kappa, lambda, model, options.flux);
  const double half = 0.5 * dt;
  // P(y_n + dt/2 F(y_n)); the trapezoid's known part
  const ClassField base_k = diffuse(euler(kappa, fn.dkappa, half), table);
  const ClassField base_l = diffuse(euler(lambda.density(), fn.dlambda, half), table);

  ClassField k_it = diffuse(kappa, table);
  DefectState l_it(diffuse(lambda.density(), table), model);
  if (options.on_iterate) options.on_iterate(0, k_it);

  for (int it = 1; it <= options.kmax; ++it) {
    const CoagFlux f = truncated_flux(k_it, l_it, model, options.flux);
    ClassField k_next = euler(base_k, f.dkappa, half);
    ClassField l_next = euler(base_l, f.dlambda, half);
    const double change = std::max(sup_abs_diff(k_next, k_it), sup_abs_diff(l_next, l_it.density()));
    const double scale = std::max({1.0, sup_abs(k_next), sup_abs(l_next)});
    k_it = std::move(k_next);
    l_it = DefectState(std::move(l_next), model);
    if (options.on_iterate) options.on_iterate(it, k_it);
    if (change < options.tol * scale) {
      StepResult r{std::move(k_it), std::move(l_it)};
      r.picard_iterations = it;
      r.clip_mass += clip_negative(r.kappa, model);
      r.lambda.modify([&](ClassField& d) { r.clip_mass += clip_negative(d, model); });
      return r;
    }
  }
  std::ostringstream msg;
  msg << "Picard iteration did not converge in " << options.kmax
      << " iterations (c_max*dt = " << cmax * dt << "); reduce dt";
  throw ConvergenceError(msg.str());
}

ClassField initial_measure(const Scenario& s) {
  ClassField mu(s.lambda0);
  for (int k = 1; k <= s.model.num_classes(); ++k) {
    auto dst = mu.cls(k);
    const auto src = s.kappa0.cls(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  return mu;
}

DiagnosticsRow diagnose(double t, const ClassField& kappa, const DefectState& lambda,
                        const Model& model, const Diagnostics& context, double clip_mass,
                        double monitor_tolerance) {
  DiagnosticsRow row;
  row.t = t;
  row.mass_mu = total_mass(kappa, model);
  row.mass_lambda = total_mass(lambda.density(), model);
  row.eta_l1 = norm_l1(lambda.eta(), kappa.grid());
  const int m = kappa.num_classes();
  std::vector<double> w = weights(model, m), w2(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w2[i] = w[i] * w[i];
  const auto wmom = bracket(w, kappa);
  row.wmom_l1 = norm_l1(wmom, kappa.grid());
  row.wmom_inf = norm_inf(wmom);
  row.w2_sup = norm_inf(bracket(w2, kappa));
  const double zeta = context.horizon.zeta_lower;
  if (t < zeta) row.bound_horizon_ok = row.w2_sup <= (1.0 + monitor_tolerance) / (zeta - t);
  if (context.growth_constant) {
    const double alpha = context.horizon.alpha;
    const double bound = alpha * std::exp(2.0 * *context.growth_constant * alpha * t);
    row.bound_global_ok = row.w2_sup <= (1.0 + monitor_tolerance) * bound;
  }
  row.clip_mass = clip_mass;
  return row;
}

namespace {

void require_admissible(const Scenario& s) {
  if (s.force) return;
  const AdmissibilityReport rep = check_admissible(s.model);
  if (rep.admissible()) return;
  std::ostringstream msg;
  msg << "model fails admissibility";
  if (!rep.violations.empty()) {
    const auto& v = rep.violations.front();
    msg << " (" << v.check << " at (" << v.i << ", " << v.j << "): " << v.lhs << " vs " << v.rhs << ")";
  }
  msg << "; pass force to override";
  throw AdmissibilityError(msg.str());
}

struct Tape {
  std::vector<RecordedStep> steps;
  std::size_t bytes = 0;
  std::size_t limit = 0;
};

RunResult run_impl(const Scenario& s, const PropagatorTable& table, Integrator integrator,
                   Tape* tape) {
  s.validate();
  require_admissible(s);
  if (!(table.grid() == s.grid) || table.num_classes() < s.model.table_classes())
    throw ShapeError("propagator table does not cover the scenario");
  if (std::abs(table.dt() - s.dt) > 1e-15 * s.dt) throw ShapeError("propagator table dt mismatch");

  RunResult out;
  Diagnostics& diag = out.diagnostics;
  diag.mu_star = dominating_measure(initial_measure(s));
  diag.horizon = alpha_and_horizon(s.model, diag.mu_star);
  if (s.model.has_v_weights()) {
    double c = 0.0;
    for (int k = 1; k <= s.model.table_classes(); ++k)
      c = std::max(c, s.model.v_weight(k) / s.model.weight(k));
    diag.growth_constant = c;
  }
  diag.t_end_beyond_horizon = s.t_end > diag.horizon.zeta_lower;

  ClassField kappa = s.kappa0;
  DefectState lambda(s.lambda0, s.model);
  double clip = 0.0;
  auto record = [&](double t) {
    out.trajectory.times.push_back(t);
    out.trajectory.kappa.push_back(kappa);
    out.trajectory.lambda.push_back(lambda.density());
    DiagnosticsRow row = diagnose(t, kappa, lambda, s.model, diag, clip, s.monitor_tolerance);
    diag.horizon_bound_tripped |= !row.bound_horizon_ok;
    if (row.bound_global_ok) diag.global_bound_tripped |= !*row.bound_global_ok;
    diag.rows.push_back(row);
  };
  record(0.0);

  const std::int64_t steps = s.steps();
  const std::size_t field_bytes = sizeof(double) * kappa.raw().size();
  for (std::int64_t n = 1; n <= steps; ++n) {
    StepResult r{ClassField(s.grid, 0), DefectState(s.grid, s.model)};
    if (integrator == Integrator::strang) {
      StrangOptions opt{s.max_coag_substeps, nullptr};
      if (tape) {
        tape->steps.emplace_back();
        opt.record = &tape->steps.back();
      }
      r = step_strang(kappa, lambda, s.model, table, s.dt, opt);
      if (tape) {
        // recorded c fields plus the gains the replay will keep per substep
        tape->bytes += 4 * field_bytes * static_cast<std::size_t>(r.substeps);
        if (tape->bytes > tape->limit) {
          std::ostringstream msg;
          msg << "minimal iteration storage exceeds " << tape->limit << " bytes after step " << n
              << " of " << steps << "; shorten t_end or coarsen the grid";
          throw StorageError(msg.str());
        }
      }
    } else {
      DuhamelOptions opt;
      opt.tol = s.picard_tol;
      opt.kmax = s.picard_kmax;
      r = step_duhamel(kappa, lambda, s.model, table, s.dt, opt);
    }
    kappa = std::move(r.kappa);
    lambda = std::move(r.lambda);
    clip += r.clip_mass;
    diag.total_substeps += r.substeps;
    diag.total_picard_iterations += r.picard_iterations;
    if (n % s.cadence == 0 || n == steps) record(static_cast<double>(n) * s.dt);
  }
  return out;
}

}  // namespace

RunResult run(const Scenario& scenario, const PropagatorTable& table) {
  return run_impl(scenario, table, scenario.integrator, nullptr);
}

RunResult run(const Scenario& scenario) {
  scenario.validate();
  const PropagatorTable table = build_propagator(scenario.grid, scenario.model, scenario.dt);
  return run(scenario, table);
}

// ---------------------------------------------------------------------------
// Monotone refinement in the truncation level

bool MonotonicityReport::clean() const {
  if (!eta_decreasing) return false;
  return std::all_of(pairs.begin(), pairs.end(), [](const MonotonicityPair& p) {
    return p.kappa_violations == 0 && p.w_violations == 0;
  });
}

MonotonicityReport refine_in_M(const Scenario& scenario, const std::vector<int>& levels) {
  scenario.validate();
  if (levels.empty()) throw std::invalid_argument("refine_in_M: empty level list");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || levels[i] > scenario.model.num_classes())
      throw std::invalid_argument("refine_in_M: level outside the model's kernel table");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw std::invalid_argument("refine_in_M: levels must be strictly ascending");
  }
  const ClassField mu0 = initial_measure(scenario);
  const PropagatorTable table = build_propagator(scenario.grid, scenario.model, scenario.dt);

  std::vector<RunResult> runs;
  std::vector<Model> models;
  for (int m : levels) {
    Model model = scenario.model.truncated(m);
    for (int k = 2 * m + 1; k <= mu0.num_classes(); ++k)
      for (double x : mu0.cls(k))
        if (x != 0.0)
          throw std::invalid_argument("refine_in_M: initial data heavier than 2M at level " +
                                      std::to_string(m));
    ClassField kappa0(scenario.grid, m), lambda0(scenario.grid, 2 * m);
    for (int k = 1; k <= 2 * m; ++k) {
      const auto src = mu0.cls(k);
      auto dst = k <= m ? kappa0.cls(k) : lambda0.cls(k);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    Scenario level{model,
                   scenario.grid,
                   std::move(kappa0),
                   std::move(lambda0),
                   scenario.dt,
                   scenario.t_end,
                   scenario.integrator,
                   scenario.picard_tol,
                   scenario.picard_kmax,
                   scenario.cadence,
                   scenario.max_coag_substeps,
                   scenario.monitor_tolerance,
                   scenario.force};
    runs.push_back(run(level, table));
    models.push_back(std::move(model));
  }

  MonotonicityReport rep;
  rep.levels = levels;
  rep.times = runs.front().trajectory.times;
  const std::size_t nt = rep.times.size();

  // <w, mu> + eta per level and time
  std::vector<std::vector<std::vector<double>>> wsum(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<double> etas;
    const auto w = weights(models[l], levels[l]);
    for (std::size_t t = 0; t < nt; ++t) {
      const DefectState lam(runs[l].trajectory.lambda[t], models[l]);
      auto s = bracket(w, runs[l].trajectory.kappa[t]);
      for (std::size_t c = 0; c < s.size(); ++c) s[c] += lam.eta()[c];
      wsum[l].push_back(std::move(s));
      etas.push_back(norm_l1(lam.eta(), scenario.grid));
    }
    rep.eta_l1.push_back(std::move(etas));
  }

  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    MonotonicityPair p;
    p.m_lo = levels[l];
    p.m_hi = levels[l + 1];
    double scale_k = 0.0, scale_w = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      scale_k = std::max({scale_k, sup_abs(runs[l].trajectory.kappa[t]),
                          sup_abs(runs[l + 1].trajectory.kappa[t])});
      for (double x : wsum[l][t]) scale_w = std::max(scale_w, std::abs(x));
      for (double x : wsum[l + 1][t]) scale_w = std::max(scale_w, std::abs(x));
    }
    p.epsilon_kappa = 1e-8 * scale_k;
    p.epsilon_w = 1e-8 * scale_w;
    p.worst_kappa_excess = -std::numeric_limits<double>::infinity();
    p.worst_w_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) {
      const ClassField& lo = runs[l].trajectory.kappa[t];
      const ClassField& hi = runs[l + 1].trajectory.kappa[t];
      for (int k = 1; k <= p.m_lo; ++k) {
        const auto a = lo.cls(k);
        const auto b = hi.cls(k);
        for (std::size_t c = 0; c < a.size(); ++c) {
          const double excess = a[c] - b[c];
          p.worst_kappa_excess = std::max(p.worst_kappa_excess, excess);
          if (excess > p.epsilon_kappa) ++p.kappa_violations;
        }
      }
      for (std::size_t c = 0; c < wsum[l][t].size(); ++c) {
        const double excess = wsum[l + 1][t][c] - wsum[l][t][c];
        p.worst_w_excess = std::max(p.worst_w_excess, excess);
        if (excess > p.epsilon_w) ++p.w_violations;
      }
      const double eta_scale = std::max(rep.eta_l1[l][t], rep.eta_l1[l + 1][t]);
      if (rep.eta_l1[l + 1][t] > rep.eta_l1[l][t] + 1e-8 * eta_scale) rep.eta_decreasing = false;
    }
    rep.pairs.push_back(p);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Minimal solution iteration

namespace {

ClassField live_gain(const ClassField& nu, const Model& model) {
  const int m = model.num_classes();
  const auto mm = static_cast<std::size_t>(m);
  ClassField g(nu.grid(), m);
  std::vector<double> k(mm), full(2 * mm);
  for (std::size_t cell = 0; cell < nu.cells(); ++cell) {
    for (int i = 1; i <= m; ++i) k[static_cast<std::size_t>(i - 1)] = nu.at(i, cell);
    gain_cell(model, k, full);
    for (int i = 1; i <= m; ++i) g.at(i, cell) = full[static_cast<std::size_t>(i - 1)];
  }
  return g;
}

struct StageGains {
  ClassField g0;
  ClassField g1;
};

// Replays recorded substeps on nu with frozen loss rates; gains come from the
// previous iterate's stage values (zero for the first iterate).
void replay_half(ClassField& nu, const std::vector<RecordedSubstep>& subs,
                 const std::vector<StageGains>* previous, std::vector<StageGains>* next,
                 const Model& model) {
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const RecordedSubstep& rec = subs[s];
    const double h = rec.h;
    const std::vector<double>& c0 = rec.c_stage0.raw();
    const std::vector<double>& c1 = rec.c_stage1.raw();
    const std::vector<double>* g0 = previous ? &(*previous)[s].g0.raw() : nullptr;
    const std::vector<double>* g1 = previous ? &(*previous)[s].g1.raw() : nullptr;

    ClassField s1(nu.grid(), nu.num_classes());
    std::vector<double>& y = nu.raw();
    for (std::size_t i = 0; i < y.size(); ++i)
      s1.raw()[i] = y[i] + h * ((g0 ? (*g0)[i] : 0.0) - c0[i] * y[i]);
    if (next) next->push_back({live_gain(nu, model), live_gain(s1, model)});
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double s2 = s1.raw()[i] + h * ((g1 ? (*g1)[i] : 0.0) - c1[i] * s1.raw()[i]);
      y[i] = 0.5 * (y[i] + s2);
    }
    clip_negative(nu, model);
  }
}

double l1_distance(const ClassField& a, const ClassField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.raw().size(); ++i) s += std::abs(a.raw()[i] - b.raw()[i]);
  return s * a.grid().cell_volume();
}

}  // namespace

MinimalIterationResult minimal_iteration(const Scenario& scenario,
                                         const MinimalIterationOptions& options) {
  if (options.kmax < 0) throw std::invalid_argument("minimal_iteration: kmax must be >= 0");
  scenario.validate();
  const PropagatorTable table = build_propagator(scenario.grid, scenario.model, scenario.dt);
  Tape tape;
  tape.limit = options.storage_limit_bytes;
  MinimalIterationResult out;
  out.run = run_impl(scenario, table, Integrator::strang, &tape);

  const Model& model = scenario.model;
  const std::int64_t steps = scenario.steps();
  const Trajectory& mu = out.run.trajectory;

  struct StepGains {
    std::vector<StageGains> first;
    std::vector<StageGains> second;
  };
  std::vector<StepGains> previous;
  for (int k = 0; k <= options.kmax; ++k) {
    std::vector<StepGains> next(static_cast<std::size_t>(steps));
    const bool keep = k < options.kmax;
    ClassField nu = scenario.kappa0;
    Trajectory traj;
    traj.times.push_back(0.0);
    traj.kappa.push_back(nu);
    for (std::int64_t n = 1; n <= steps; ++n) {
      const auto u = static_cast<std::size_t>(n - 1);
      const RecordedStep& rec = tape.steps[u];
      replay_half(nu, rec.first_half, previous.empty() ? nullptr : &previous[u].first,
                  keep ? &next[u].first : nullptr, model);
      nu = diffuse(nu, table);
      replay_half(nu, rec.second_half, previous.empty() ? nullptr : &previous[u].second,
                  keep ? &next[u].second : nullptr, model);
      if (n % scenario.cadence == 0 || n == steps) {
        traj.times.push_back(static_cast<double>(n) * scenario.dt);
        traj.kappa.push_back(nu);
      }
    }
    double gap = 0.0;
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < traj.times.size(); ++t) {
      gap = std::max(gap, l1_distance(traj.kappa[t], mu.kappa[t]));
      for (std::size_t i = 0; i < traj.kappa[t].raw().size(); ++i)
        excess = std::max(excess, traj.kappa[t].raw()[i] - mu.kappa[t].raw()[i]);
    }
    out.iterates.push_back(std::move(traj));
    out.gap.push_back(gap);
    out.max_excess.push_back(excess);
    if (gap == 0.0) break;
    previous = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weak form residual

namespace {

std::vector<double> laplacian(std::span<const double> f, const SpatialGrid& grid) {
  std::vector<double> out(f.size(), 0.0);
  const int n = grid.cells_per_axis();
  const double inv_dx2 = 1.0 / (grid.spacing() * grid.spacing());
  for (std::size_t c = 0; c < f.size(); ++c) {
    const auto idx = grid.unravel(c);
    double acc = 0.0;
    for (int ax = 0; ax < grid.dim(); ++ax) {
      auto up = idx, down = idx;
      const auto u = static_cast<std::size_t>(ax);
      up[u] = (idx[u] + 1) % n;
      down[u] = (idx[u] + n - 1) % n;
      acc += f[grid.ravel(up)] - 2.0 * f[c] + f[grid.ravel(down)];
    }
    out[c] = acc * inv_dx2;
  }
  return out;
}

}  // namespace

std::vector<double> weak_residual(const Trajectory& trajectory, const ClassField& f,
                                  const Model& model) {
  const int m = model.num_classes();
  if (trajectory.times.empty()) return {};
  const SpatialGrid& grid = trajectory.kappa.front().grid();
  if (!(f.grid() == grid)) throw ShapeError("weak_residual: test function grid mismatch");
  for (int k = m + 1; k <= f.num_classes(); ++k)
    for (double x : f.cls(k))
      if (x != 0.0) throw std::invalid_argument("weak_residual: test function supported beyond class M");

  const auto mm = static_cast<std::size_t>(m);
  ClassField fm(grid, m);  // f restricted / zero-padded to 1..M
  for (int k = 1; k <= std::min(m, f.num_classes()); ++k) {
    const auto src = f.cls(k);
    std::copy(src.begin(), src.end(), fm.cls(k).begin());
  }
  ClassField gen(grid, m);  // a_k/2 Lap_h f_k
  for (int k = 1; k <= m; ++k) {
    const auto lap = laplacian(fm.cls(k), grid);
    auto dst = gen.cls(k);
    for (std::size_t c = 0; c < lap.size(); ++c) dst[c] = 0.5 * model.diffusivity(k) * lap[c];
  }

  const double vol = grid.cell_volume();
  auto pair = [&](const ClassField& g, const ClassField& kappa) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.raw().size(); ++i) s += g.raw()[i] * kappa.raw()[i];
    return s * vol;
  };
  auto coag_pair = [&](const ClassField& kappa) {
    std::vector<double> k(mm), g(2 * mm), c(mm);
    double s = 0.0;
    for (std::size_t cell = 0; cell < kappa.cells(); ++cell) {
      for (int i = 1; i <= m; ++i) k[static_cast<std::size_t>(i - 1)] = kappa.at(i, cell);
      gain_cell(model, k, g);
      loss_rate_cell(model, k, 0.0, c);
      for (int i = 1; i <= m; ++i) {
        const auto u = static_cast<std::size_t>(i - 1);
        s += fm.at(i, cell) * (g[u] - c[u] * k[u]);
      }
    }
    return s * vol;
  };

  std::vector<double> residual;
  const double f0 = pair(fm, trajectory.kappa.front());
  double integral = 0.0;
  double prev_integrand = pair(gen, trajectory.kappa.front()) + coag_pair(trajectory.kappa.front());
  residual.push_back(0.0);
  for (std::size_t t = 1; t < trajectory.times.size(); ++t) {
    const ClassField& kappa = trajectory.kappa[t];
    if (kappa.num_classes() != m) throw ShapeError("weak_residual: trajectory class count mismatch");
    const double integrand = pair(gen, kappa) + coag_pair(kappa);
    integral += 0.5 * (trajectory.times[t] - trajectory.times[t - 1]) * (integrand + prev_integrand);
    prev_integrand = integrand;
    residual.push_back(pair(fm, kappa) - f0 - integral);
  }
  return residual;
}

}  // namespace coagdiff
