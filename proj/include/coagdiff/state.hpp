// Discretised measures on (spatial torus) x (mass classes).
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "coagdiff/typespace.hpp"

namespace coagdiff {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Periodic grid of cells_per_axis^dim cells on [0, length)^dim.
class SpatialGrid {
 public:
  SpatialGrid(int dim, int cells_per_axis, double length);

  int dim() const { return dim_; }
  int cells_per_axis() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return length_ / n_; }
  std::size_t cell_count() const { return count_; }
  double cell_volume() const { return volume_; }

  /// Cell index -> per-axis indices (axis 0 varies fastest).
  std::array<int, 3> unravel(std::size_t cell) const;
  std::size_t ravel(const std::array<int, 3>& idx) const;
  double center(int axis_index) const { return (axis_index + 0.5) * spacing(); }

  bool operator==(const SpatialGrid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && length_ == o.length_;
  }

 private:
  int dim_;
  int n_;
  double length_;
  std::size_t count_;
  double volume_;
};

/// Dense class-major array over classes 1..num_classes and grid cells.
/// Holds densities (number per unit volume), signed rates, or rate fields.
class ClassField {
 public:
  ClassField(SpatialGrid grid, int num_classes);

  const SpatialGrid& grid() const { return grid_; }
  int num_classes() const { return classes_; }
  std::size_t cells() const { return grid_.cell_count(); }

  std::span<double> cls(int k) { return {data_.data() + offset(k), cells()}; }
  std::span<const double> cls(int k) const { return {data_.data() + offset(k), cells()}; }
  double& at(int k, std::size_t cell) { return data_[offset(k) + cell]; }
  double at(int k, std::size_t cell) const { return data_[offset(k) + cell]; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const ClassField& o) const {
    return classes_ == o.classes_ && grid_ == o.grid_;
  }
  bool nonnegative() const;
  bool finite() const;

 private:
  std::size_t offset(int k) const {
    return static_cast<std::size_t>(k - 1) * grid_.cell_count();
  }

  SpatialGrid grid_;
  int classes_;
  std::vector<double> data_;
};

/// Kernel kappa of mu_t with respect to Lebesgue measure: kappa[k][cell] >= 0.
using StateMeasure = ClassField;

/// Defect (lambda) population over classes 1..2M and its cached weight
/// field eta = <w, lambda>. Every mutation goes through modify(), which
/// recomputes eta.
class DefectState {
 public:
  DefectState(SpatialGrid grid, const Model& model);
  DefectState(ClassField density, const Model& model);

  const ClassField& density() const { return density_; }
  const std::vector<double>& eta() const { return eta_; }
  const SpatialGrid& grid() const { return density_.grid(); }
  int num_classes() const { return density_.num_classes(); }

  template <class F>
  void modify(F&& f) {
    f(density_);
    refresh_eta();
  }

 private:
  void refresh_eta();

  ClassField density_;
  std::vector<double> weights_;
  std::vector<double> eta_;
};

using DominatingMeasure = std::vector<double>;

/// field(cell) = sum_k f_k kappa[k][cell]; f indexed by class-1.
std::vector<double> bracket(std::span<const double> f, const ClassField& kappa);

double norm_l1(std::span<const double> field, const SpatialGrid& grid);
double norm_inf(std::span<const double> field);

/// sum_k m_k sum_cells kappa[k][cell] * cell volume.
double total_mass(const ClassField& kappa, const Model& model);

/// Per-class spatial maximum: the least constant-in-x dominating measure.
DominatingMeasure dominating_measure(const ClassField& kappa0);

struct Horizon {
  double alpha = 0.0;
  double zeta_lower = 0.0;  // +inf when alpha == 0
};

/// alpha = sum_k w_k^2 mu*_k, zeta_lower = 1 / alpha.
Horizon alpha_and_horizon(const Model& model, const DominatingMeasure& mu_star);

/// Per-class vector over classes 1..n of a model coefficient.
std::vector<double> masses(const Model& model, int n);
std::vector<double> weights(const Model& model, int n);

}  // namespace coagdiff
