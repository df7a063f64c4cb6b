// Time integration of the truncated coagulation-diffusion system.
//
// Live particles (classes 1..M) diffuse and coagulate; products heavier than
// M and live particles converted by the defect field eta = <w, lambda> enter
// the defect population (classes 1..2M), which only diffuses. Two integrators
// are provided: operator splitting (coagulation half-step, diffusion,
// coagulation half-step) and a Picard iteration on the one-step mild map.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coagdiff/coagulation.hpp"
#include "coagdiff/heatflow.hpp"
#include "coagdiff/state.hpp"
#include "coagdiff/typespace.hpp"

namespace coagdiff {

class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Integrator { strang, duhamel };

const char* to_string(Integrator integrator);

/// Coagulation substeps satisfy h * c_max <= kStabilityFactor.
inline constexpr double kStabilityFactor = 0.5;

struct Scenario {
  Model model;
  SpatialGrid grid;
  ClassField kappa0;   // classes 1..M
  ClassField lambda0;  // classes 1..2M
  double dt = 1e-3;
  double t_end = 1.0;
  Integrator integrator = Integrator::strang;
  double picard_tol = 1e-12;
  int picard_kmax = 100;
  int cadence = 1;
  int max_coag_substeps = 4096;
  double monitor_tolerance = 0.05;
  bool force = false;

  /// Zero defect population, defaults elsewhere.
  static Scenario with_initial(Model model, SpatialGrid grid, ClassField kappa0, double dt,
                               double t_end);
  void validate() const;
  std::int64_t steps() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ClassField> kappa;
  std::vector<ClassField> lambda;
};

struct DiagnosticsRow {
  double t = 0.0;
  double mass_mu = 0.0;
  double mass_lambda = 0.0;
  double eta_l1 = 0.0;
  double wmom_l1 = 0.0;
  double wmom_inf = 0.0;
  double w2_sup = 0.0;
  bool bound_horizon_ok = true;
  std::optional<bool> bound_global_ok;
  double clip_mass = 0.0;
};

struct Diagnostics {
  std::vector<DiagnosticsRow> rows;
  Horizon horizon;
  DominatingMeasure mu_star;
  std::optional<double> growth_constant;  // C = max v/w when v is present
  bool horizon_bound_tripped = false;
  bool global_bound_tripped = false;
  bool t_end_beyond_horizon = false;
  std::int64_t total_substeps = 0;
  std::int64_t total_picard_iterations = 0;
};

struct RunResult {
  Trajectory trajectory;
  Diagnostics diagnostics;
};

/// One recorded coagulation substep of the splitting integrator: the loss
/// rates at both Runge-Kutta stage inputs.
struct RecordedSubstep {
  double h = 0.0;
  ClassField c_stage0;
  ClassField c_stage1;
};

struct RecordedStep {
  std::vector<RecordedSubstep> first_half;
  std::vector<RecordedSubstep> second_half;
};

struct StepResult {
  ClassField kappa;
  DefectState lambda;
  double clip_mass = 0.0;
  int substeps = 0;
  int picard_iterations = 0;
};

struct StrangOptions {
  int max_substeps = 4096;
  RecordedStep* record = nullptr;
};

struct DuhamelOptions {
  double tol = 1e-12;
  int kmax = 100;
  FluxOptions flux = {};
  /// Called with each Picard iterate of the live state (k = 0, 1, ...).
  std::function<void(int, const ClassField&)> on_iterate;
};

StepResult step_strang(const ClassField& kappa, const DefectState& lambda, const Model& model,
                       const PropagatorTable& table, double dt, const StrangOptions& options = {});

StepResult step_duhamel(const ClassField& kappa, const DefectState& lambda, const Model& model,
                        const PropagatorTable& table, double dt,
                        const DuhamelOptions& options = {});

/// Runs to t_end; throws AdmissibilityError unless the model passes
/// check_admissible or scenario.force is set.
RunResult run(const Scenario& scenario);
/// Same with a prebuilt table (at least 2M classes on the scenario grid).
RunResult run(const Scenario& scenario, const PropagatorTable& table);

/// Live and defect parts of the initial data merged into one measure over
/// classes 1..2M.
ClassField initial_measure(const Scenario& scenario);

struct MonotonicityPair {
  int m_lo = 0;
  int m_hi = 0;
  double epsilon_kappa = 0.0;
  double epsilon_w = 0.0;
  double worst_kappa_excess = 0.0;  // max of kappa^lo - kappa^hi
  double worst_w_excess = 0.0;      // max of (<w,mu^hi>+eta^hi) - (<w,mu^lo>+eta^lo)
  std::int64_t kappa_violations = 0;
  std::int64_t w_violations = 0;
};

struct MonotonicityReport {
  std::vector<int> levels;
  std::vector<double> times;
  std::vector<std::vector<double>> eta_l1;  // [level][time]
  std::vector<MonotonicityPair> pairs;
  bool eta_decreasing = true;

  bool clean() const;
};

/// Runs the scenario at each truncation level (ascending, each <= model M)
/// with shared propagator tables and compares consecutive levels at every
/// output time.
MonotonicityReport refine_in_M(const Scenario& scenario, const std::vector<int>& levels);

struct MinimalIterationResult {
  RunResult run;
  std::vector<Trajectory> iterates;  // live part only
  std::vector<double> gap;           // max over output times of ||nu^k - mu||_1
  std::vector<double> max_excess;    // max over entries of nu^k - mu
};

struct MinimalIterationOptions {
  int kmax = 30;
  std::size_t storage_limit_bytes = std::size_t{1} << 30;
};

/// Iterates nu^{k+1} = P^mu nu_0 + int P^mu K+(nu^k) with the killed
/// propagator frozen from a splitting run of the scenario.
MinimalIterationResult minimal_iteration(const Scenario& scenario,
                                         const MinimalIterationOptions& options = {});

/// (f,mu_t) - (f,mu_0) - int (a/2 Lap_h f, mu_s) ds - int (f, K(mu_s)) ds at each
/// stored time; trapezoidal in time. f has classes 1..M (values beyond M must
/// be zero).
std::vector<double> weak_residual(const Trajectory& trajectory, const ClassField& f,
                                  const Model& model);

DiagnosticsRow diagnose(double t, const ClassField& kappa, const DefectState& lambda,
                        const Model& model, const Diagnostics& context, double clip_mass,
                        double monitor_tolerance);

}  // namespace coagdiff
