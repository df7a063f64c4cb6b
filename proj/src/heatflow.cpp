#include "coagdiff/heatflow.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace coagdiff {
namespace {

// Wrapped 1-D Gaussian density of variance s2 at distance x on a circle of
// length L. Image sum is truncated once a term drops below 1e-16 of the total.
double wrapped_gaussian(double s2, double x, double length) {
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
  double total = norm * std::exp(-x * x / (2.0 * s2));
  for (int n = 1;; ++n) {
    const double xp = x + n * length;
    const double xm = x - n * length;
    const double term = norm * (std::exp(-xp * xp / (2.0 * s2)) + std::exp(-xm * xm / (2.0 * s2)));
    total += term;
    if (term <= 1e-16 * total || n > 10000) break;
  }
  return total;
}

std::vector<double> circulant_row(const SpatialGrid& grid, double s2) {
  const int n = grid.cells_per_axis();
  std::vector<double> row(static_cast<std::size_t>(n), 0.0);
  if (n == 1) {
    row[0] = 1.0;
    return row;
  }
  const double dx = grid.spacing();
  for (int o = 0; o <= n / 2; ++o) {
    const double v = wrapped_gaussian(s2, o * dx, grid.length()) * dx;
    row[static_cast<std::size_t>(o)] = v;
    row[static_cast<std::size_t>((n - o) % n)] = v;
  }
  double sum = 0.0;
  for (double v : row) sum += v;
  for (double& v : row) v /= sum;
  return row;
}

}  // namespace

PropagatorTable::PropagatorTable(SpatialGrid grid, double dt, std::vector<double> diffusivity,
                                 std::vector<std::vector<double>> rows)
    : grid_(grid), dt_(dt), diffusivity_(std::move(diffusivity)), rows_(std::move(rows)) {
  if (diffusivity_.size() != rows_.size()) throw ShapeError("propagator: class count mismatch");
  for (const auto& r : rows_)
    if (r.size() != static_cast<std::size_t>(grid_.cells_per_axis()))
      throw ShapeError("propagator: row length must equal cells_per_axis");
}

double PropagatorTable::entry(int k, std::size_t from, std::size_t to) const {
  const auto a = grid_.unravel(from);
  const auto b = grid_.unravel(to);
  const int n = grid_.cells_per_axis();
  const auto r = row(k);
  double v = 1.0;
  for (int ax = 0; ax < grid_.dim(); ++ax) {
    const auto u = static_cast<std::size_t>(ax);
    v *= r[static_cast<std::size_t>(((b[u] - a[u]) % n + n) % n)];
  }
  return v;
}

void PropagatorTable::apply(int k, std::span<const double> in, std::span<double> out) const {
  const std::size_t cells = grid_.cell_count();
  if (in.size() != cells || out.size() != cells) throw ShapeError("propagator: field size mismatch");
  const auto n = static_cast<std::size_t>(grid_.cells_per_axis());
  const auto r = row(k);
  if (n == 1) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  // axis by axis; ping-pong through scratch, last pass lands in out
  thread_local std::vector<double> scratch;
  scratch.resize(2 * cells);
  std::span<const double> src = in;
  std::span<double> bufs[2] = {std::span<double>(scratch.data(), cells),
                               std::span<double>(scratch.data() + cells, cells)};
  std::size_t stride = 1;
  for (int ax = 0; ax < grid_.dim(); ++ax) {
    std::span<double> dst = ax == grid_.dim() - 1 ? out : bufs[ax % 2];
    const std::size_t block = stride * n;
    for (std::size_t base = 0; base < cells; base += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t origin = base + inner;
        for (std::size_t to = 0; to < n; ++to) {
          double acc = 0.0;
          for (std::size_t from = 0; from < n; ++from)
            acc += src[origin + from * stride] * r[(to + n - from) % n];
          dst[origin + to * stride] = acc;
        }
      }
    }
    src = dst;
    stride = block;
  }
}

PropagatorTable build_propagator(const SpatialGrid& grid, std::vector<double> diffusivity,
                                 double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PropagatorError("propagator: dt must be positive");
  std::vector<std::vector<double>> rows;
  rows.reserve(diffusivity.size());
  const double half = 0.5 * grid.length();
  for (std::size_t k = 0; k < diffusivity.size(); ++k) {
    const double s2 = diffusivity[k] * dt;
    if (grid.cells_per_axis() > 1 && s2 > half * half) {
      std::ostringstream msg;
      msg << "propagator: class " << k + 1 << " has a*dt = " << s2 << " > (L/2)^2 = " << half * half
          << "; the diffusion length exceeds the periodic domain, enlarge the grid or reduce dt";
      throw PropagatorError(msg.str());
    }
    rows.push_back(circulant_row(grid, s2));
  }
  return PropagatorTable(grid, dt, std::move(diffusivity), std::move(rows));
}

PropagatorTable build_propagator(const SpatialGrid& grid, const Model& model, double dt) {
  return build_propagator(grid, model.diffusivities(), dt);
}

PropagatorTable compose(const PropagatorTable& first, const PropagatorTable& second) {
  if (!(first.grid() == second.grid()) || first.num_classes() != second.num_classes())
    throw ShapeError("compose: table shapes differ");
  const auto n = static_cast<std::size_t>(first.grid().cells_per_axis());
  std::vector<std::vector<double>> rows;
  std::vector<double> a;
  for (int k = 1; k <= first.num_classes(); ++k) {
    const auto r1 = first.row(k);
    const auto r2 = second.row(k);
    std::vector<double> r(n, 0.0);
    for (std::size_t o = 0; o < n; ++o)
      for (std::size_t p = 0; p < n; ++p) r[(o + p) % n] += r1[o] * r2[p];
    rows.push_back(std::move(r));
    a.push_back(first.diffusivity(k));
  }
  return PropagatorTable(first.grid(), first.dt() + second.dt(), std::move(a), std::move(rows));
}

ClassField diffuse(const ClassField& kappa, const PropagatorTable& table) {
  if (!(kappa.grid() == table.grid()) || kappa.num_classes() > table.num_classes())
    throw ShapeError("diffuse: table does not match state shape");
  ClassField out(kappa.grid(), kappa.num_classes());
  for (int k = 1; k <= kappa.num_classes(); ++k) table.apply(k, kappa.cls(k), out.cls(k));
  return out;
}

ClassField propagate_with_potential(const ClassField& kappa, const ClassField& c,
                                    const PropagatorTable& table, double dt) {
  if (!kappa.same_shape(c)) throw ShapeError("propagate_with_potential: potential shape mismatch");
  for (double x : c.raw())
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("propagate_with_potential: potential must be finite and >= 0");
  ClassField half(kappa);
  for (std::size_t i = 0; i < half.raw().size(); ++i)
    half.raw()[i] *= std::exp(-0.5 * dt * c.raw()[i]);
  ClassField out = diffuse(half, table);
  for (std::size_t i = 0; i < out.raw().size(); ++i)
    out.raw()[i] *= std::exp(-0.5 * dt * c.raw()[i]);
  return out;
}

double profile_variance(std::span<const double> profile, const SpatialGrid& grid, double centre) {
  if (grid.dim() != 1 || profile.size() != grid.cell_count())
    throw ShapeError("profile_variance: 1-D profile expected");
  const double length = grid.length();
  double mass = 0.0, second = 0.0;
  for (std::size_t c = 0; c < profile.size(); ++c) {
    double x = grid.center(static_cast<int>(c)) - centre;
    x -= length * std::round(x / length);
    mass += profile[c];
    second += profile[c] * x * x;
  }
  return second / mass;
}

}  // namespace coagdiff
