// Per-class heat propagator on the torus and its killed (potential) variant.
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "coagdiff/state.hpp"
#include "coagdiff/typespace.hpp"

namespace coagdiff {

class PropagatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-step transition operator for each class 1..n. The wrapped Gaussian
/// factorises over axes, so each class stores a single circulant row:
/// T_k[from -> to] = prod_axes row_k[(to_a - from_a) mod N].
class PropagatorTable {
 public:
  PropagatorTable(SpatialGrid grid, double dt, std::vector<double> diffusivity,
                  std::vector<std::vector<double>> rows);

  const SpatialGrid& grid() const { return grid_; }
  double dt() const { return dt_; }
  int num_classes() const { return static_cast<int>(rows_.size()); }
  double diffusivity(int k) const { return diffusivity_[static_cast<std::size_t>(k - 1)]; }
  std::span<const double> row(int k) const { return rows_[static_cast<std::size_t>(k - 1)]; }

  double entry(int k, std::size_t from, std::size_t to) const;

  /// out = T_k in (in and out may not alias).
  void apply(int k, std::span<const double> in, std::span<double> out) const;

 private:
  SpatialGrid grid_;
  double dt_;
  std::vector<double> diffusivity_;
  std::vector<std::vector<double>> rows_;
};

/// Tables for classes 1..2M with variance a_k*dt per axis.
PropagatorTable build_propagator(const SpatialGrid& grid, const Model& model, double dt);
/// Same, for an explicit diffusivity list (class k -> diffusivity[k-1]).
PropagatorTable build_propagator(const SpatialGrid& grid, std::vector<double> diffusivity,
                                 double dt);

/// Composition T2 after T1 (class by class); used for semigroup checks.
PropagatorTable compose(const PropagatorTable& first, const PropagatorTable& second);

ClassField diffuse(const ClassField& kappa, const PropagatorTable& table);

/// exp(-c dt/2) . diffuse . exp(-c dt/2); c has the shape of kappa and is >= 0.
ClassField propagate_with_potential(const ClassField& kappa, const ClassField& c,
                                    const PropagatorTable& table, double dt);

/// Second moment about the centre of mass for a 1-D periodic profile, using
/// the minimum-image distance to `centre`.
double profile_variance(std::span<const double> profile, const SpatialGrid& grid, double centre);

}  // namespace coagdiff
