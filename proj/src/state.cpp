#include "coagdiff/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace coagdiff {

SpatialGrid::SpatialGrid(int dim, int cells_per_axis, double length)
    : dim_(dim), n_(cells_per_axis), length_(length) {
  if (dim < 1 || dim > 3) throw ShapeError("grid dim must be 1, 2 or 3");
  if (cells_per_axis < 1) throw ShapeError("cells_per_axis must be >= 1");
  if (!(length > 0.0) || !std::isfinite(length)) throw ShapeError("grid length must be positive");
  count_ = 1;
  volume_ = 1.0;
  for (int a = 0; a < dim; ++a) {
    count_ *= static_cast<std::size_t>(n_);
    volume_ *= spacing();
  }
}

std::array<int, 3> SpatialGrid::unravel(std::size_t cell) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    idx[static_cast<std::size_t>(a)] = static_cast<int>(cell % static_cast<std::size_t>(n_));
    cell /= static_cast<std::size_t>(n_);
  }
  return idx;
}

std::size_t SpatialGrid::ravel(const std::array<int, 3>& idx) const {
  std::size_t cell = 0;
  for (int a = dim_ - 1; a >= 0; --a)
    cell = cell * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]);
  return cell;
}

ClassField::ClassField(SpatialGrid grid, int num_classes)
    : grid_(grid), classes_(num_classes) {
  if (num_classes < 0) throw ShapeError("negative class count");
  data_.assign(static_cast<std::size_t>(num_classes) * grid_.cell_count(), 0.0);
}

bool ClassField::nonnegative() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return x >= 0.0; });
}

bool ClassField::finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DefectState::DefectState(SpatialGrid grid, const Model& model)
    : DefectState(ClassField(grid, model.table_classes()), model) {}

DefectState::DefectState(ClassField density, const Model& model)
    : density_(std::move(density)), weights_(weights(model, model.table_classes())) {
  if (density_.num_classes() != model.table_classes())
    throw ShapeError("defect state must span classes 1..2M");
  refresh_eta();
}

void DefectState::refresh_eta() { eta_ = bracket(weights_, density_); }

std::vector<double> bracket(std::span<const double> f, const ClassField& kappa) {
  if (f.size() != static_cast<std::size_t>(kappa.num_classes()))
    throw ShapeError("bracket: weight length " + std::to_string(f.size()) +
                     " does not match class count " + std::to_string(kappa.num_classes()));
  std::vector<double> field(kappa.cells(), 0.0);
  for (int k = 1; k <= kappa.num_classes(); ++k) {
    const double fk = f[static_cast<std::size_t>(k - 1)];
    const auto row = kappa.cls(k);
    for (std::size_t c = 0; c < field.size(); ++c) field[c] += fk * row[c];
  }
  return field;
}

double norm_l1(std::span<const double> field, const SpatialGrid& grid) {
  double s = 0.0;
  for (double x : field) s += std::abs(x);
  return s * grid.cell_volume();
}

double norm_inf(std::span<const double> field) {
  double s = 0.0;
  for (double x : field) s = std::max(s, std::abs(x));
  return s;
}

double total_mass(const ClassField& kappa, const Model& model) {
  double total = 0.0;
  for (int k = 1; k <= kappa.num_classes(); ++k) {
    double s = 0.0;
    for (double x : kappa.cls(k)) s += x;
    total += model.mass(k) * s;
  }
  return total * kappa.grid().cell_volume();
}

DominatingMeasure dominating_measure(const ClassField& kappa0) {
  DominatingMeasure mu(static_cast<std::size_t>(kappa0.num_classes()), 0.0);
  for (int k = 1; k <= kappa0.num_classes(); ++k)
    for (double x : kappa0.cls(k)) mu[static_cast<std::size_t>(k - 1)] = std::max(mu[static_cast<std::size_t>(k - 1)], x);
  return mu;
}

Horizon alpha_and_horizon(const Model& model, const DominatingMeasure& mu_star) {
  if (mu_star.size() > static_cast<std::size_t>(model.table_classes()))
    throw ShapeError("dominating measure has more classes than the model");
  Horizon h;
  for (std::size_t i = 0; i < mu_star.size(); ++i) {
    const double w = model.weight(static_cast<int>(i + 1));
    h.alpha += w * w * mu_star[i];
  }
  h.zeta_lower = h.alpha > 0.0 ? 1.0 / h.alpha : std::numeric_limits<double>::infinity();
  return h;
}

std::vector<double> masses(const Model& model, int n) {
  std::vector<double> m(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) m[static_cast<std::size_t>(k - 1)] = model.mass(k);
  return m;
}

std::vector<double> weights(const Model& model, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) w[static_cast<std::size_t>(k - 1)] = model.weight(k);
  return w;
}

}  // namespace coagdiff
