// Independent reference solutions: the spatially homogeneous Smoluchowski
// system by classical RK4 and closed-form Gaussian diffusion profiles.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "coagdiff/solver.hpp"
#include "coagdiff/state.hpp"
#include "coagdiff/typespace.hpp"

namespace coagdiff {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Reference {
  std::string provenance;  // "ode-rk4", "closed-form" or "run"
  std::vector<double> times;
  std::vector<ClassField> values;
};

/// RK4 on dn_k/dt = 1/2 sum_{i+j=k} K(i,j) n_i n_j - n_k sum_{j<=2M} K(k,j) n_j
/// over classes 1..2M (no defect bookkeeping). Records every `record_every`
/// steps; values live on a one-cell unit grid.
Reference homogeneous_ode(const Model& model, const std::vector<double>& n0, double t_end,
                          double dt_ref, int record_every = 1);

/// Wrapped Gaussian of variance sigma0^2 + a t per axis, unit total number,
/// point values at cell centres. Requires sqrt(sigma0^2 + a t) < L/6.
Reference diffusion_reference(const SpatialGrid& grid, double a, double sigma0,
                              const std::vector<double>& times,
                              const std::array<double, 3>& centre);

/// Exact cell averages of a wrapped Gaussian (variance sigma^2 per axis)
/// carrying `total` particles.
std::vector<double> gaussian_cell_average(const SpatialGrid& grid, double sigma,
                                          const std::array<double, 3>& centre, double total);

Reference to_reference(const Trajectory& trajectory, std::string provenance = "run");

struct ErrorReport {
  std::vector<double> times;
  std::vector<double> l1;                     // summed over classes
  std::vector<double> linf;                   // max over classes and cells
  std::vector<std::vector<double>> class_l1;  // [time][class-1]
  double max_l1 = 0.0;
  double max_linf = 0.0;
  double max_class_l1 = 0.0;
};

/// Compares on the run's classes at the run's times; every run time must
/// appear in the reference (no interpolation). L1 uses the run's cell volume.
ErrorReport compare(const Reference& run_output, const Reference& reference);

}  // namespace coagdiff
