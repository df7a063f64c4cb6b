#include "coagdiff/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace coagdiff {
namespace {

void smoluchowski_rhs(const Model& model, const std::vector<double>& n, std::vector<double>& dn) {
  const int top = model.table_classes();
  for (int k = 1; k <= top; ++k) {
    double g = 0.0;
    for (int i = 1; i < k; ++i)
      g += model.kernel(i, k - i) * n[static_cast<std::size_t>(i - 1)] * n[static_cast<std::size_t>(k - i - 1)];
    double l = 0.0;
    for (int j = 1; j <= top; ++j) l += model.kernel(k, j) * n[static_cast<std::size_t>(j - 1)];
    dn[static_cast<std::size_t>(k - 1)] = 0.5 * g - n[static_cast<std::size_t>(k - 1)] * l;
  }
}

// Integral of the wrapped 1-D Gaussian over [lo, hi).
double wrapped_gaussian_integral(double sigma, double lo, double hi, double length) {
  const double s = sigma * std::numbers::sqrt2;
  double total = 0.0;
  for (int n = 0;; ++n) {
    double term = 0.5 * (std::erf((hi + n * length) / s) - std::erf((lo + n * length) / s));
    if (n > 0) term += 0.5 * (std::erf((hi - n * length) / s) - std::erf((lo - n * length) / s));
    total += term;
    if ((n > 0 && std::abs(term) <= 1e-17) || n > 10000) break;
  }
  return total;
}

double wrapped_density(double var, double x, double length) {
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  double total = norm * std::exp(-x * x / (2.0 * var));
  for (int n = 1;; ++n) {
    const double xp = x + n * length, xm = x - n * length;
    const double term = norm * (std::exp(-xp * xp / (2.0 * var)) + std::exp(-xm * xm / (2.0 * var)));
    total += term;
    if (term <= 1e-17 * total || n > 10000) break;
  }
  return total;
}

bool times_match(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

Reference homogeneous_ode(const Model& model, const std::vector<double>& n0, double t_end,
                          double dt_ref, int record_every) {
  const auto top = static_cast<std::size_t>(model.table_classes());
  if (n0.size() > top) throw OracleError("homogeneous_ode: initial data beyond class 2M");
  if (!(dt_ref > 0.0) || !(t_end >= 0.0)) throw OracleError("homogeneous_ode: bad time grid");
  if (record_every < 1) throw OracleError("homogeneous_ode: record_every must be >= 1");
  std::vector<double> n(top, 0.0);
  std::copy(n0.begin(), n0.end(), n.begin());

  const SpatialGrid unit(1, 1, 1.0);
  Reference ref{"ode-rk4", {}, {}};
  auto record = [&](double t) {
    ClassField f(unit, model.table_classes());
    for (std::size_t k = 0; k < top; ++k) f.raw()[k] = n[k];
    ref.times.push_back(t);
    ref.values.push_back(std::move(f));
  };
  record(0.0);

  const auto steps = static_cast<long long>(std::llround(t_end / dt_ref));
  std::vector<double> k1(top), k2(top), k3(top), k4(top), tmp(top);
  for (long long s = 1; s <= steps; ++s) {
    smoluchowski_rhs(model, n, k1);
    for (std::size_t i = 0; i < top; ++i) tmp[i] = n[i] + 0.5 * dt_ref * k1[i];
    smoluchowski_rhs(model, tmp, k2);
    for (std::size_t i = 0; i < top; ++i) tmp[i] = n[i] + 0.5 * dt_ref * k2[i];
    smoluchowski_rhs(model, tmp, k3);
    for (std::size_t i = 0; i < top; ++i) tmp[i] = n[i] + dt_ref * k3[i];
    smoluchowski_rhs(model, tmp, k4);
    for (std::size_t i = 0; i < top; ++i) {
      n[i] += dt_ref / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!(std::abs(n[i]) <= 1e12)) {
        std::ostringstream msg;
        msg << "homogeneous_ode: blow-up in class " << i + 1 << " at t = " << s * dt_ref
            << " (value " << n[i] << ")";
        throw OracleError(msg.str());
      }
    }
    if (s % record_every == 0 || s == steps) record(static_cast<double>(s) * dt_ref);
  }
  return ref;
}

std::vector<double> gaussian_cell_average(const SpatialGrid& grid, double sigma,
                                          const std::array<double, 3>& centre, double total) {
  if (!(sigma > 0.0)) throw OracleError("gaussian_cell_average: sigma must be positive");
  const int n = grid.cells_per_axis();
  const double dx = grid.spacing();
  std::array<std::vector<double>, 3> axis;
  for (int ax = 0; ax < grid.dim(); ++ax) {
    auto& v = axis[static_cast<std::size_t>(ax)];
    v.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      // shift so the cell is measured relative to the centre, minimum image
      double lo = i * dx - centre[static_cast<std::size_t>(ax)];
      lo -= grid.length() * std::round((lo + 0.5 * dx) / grid.length());
      v[static_cast<std::size_t>(i)] = wrapped_gaussian_integral(sigma, lo, lo + dx, grid.length()) / dx;
    }
  }
  std::vector<double> out(grid.cell_count());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto idx = grid.unravel(c);
    double v = total;
    for (int ax = 0; ax < grid.dim(); ++ax)
      v *= axis[static_cast<std::size_t>(ax)][static_cast<std::size_t>(idx[static_cast<std::size_t>(ax)])];
    out[c] = v;
  }
  return out;
}

Reference diffusion_reference(const SpatialGrid& grid, double a, double sigma0,
                              const std::vector<double>& times,
                              const std::array<double, 3>& centre) {
  if (!(a >= 0.0) || !(sigma0 > 0.0)) throw OracleError("diffusion_reference: bad parameters");
  Reference ref{"closed-form", {}, {}};
  for (double t : times) {
    const double var = sigma0 * sigma0 + a * t;
    if (!(std::sqrt(var) < grid.length() / 6.0))
      throw OracleError("diffusion_reference: profile width reaches L/6; wrap is not negligible");
    ClassField f(grid, 1);
    auto dst = f.cls(1);
    for (std::size_t c = 0; c < dst.size(); ++c) {
      const auto idx = grid.unravel(c);
      double v = 1.0;
      for (int ax = 0; ax < grid.dim(); ++ax) {
        const auto u = static_cast<std::size_t>(ax);
        double x = grid.center(idx[u]) - centre[u];
        x -= grid.length() * std::round(x / grid.length());
        v *= wrapped_density(var, x, grid.length());
      }
      dst[c] = v;
    }
    ref.times.push_back(t);
    ref.values.push_back(std::move(f));
  }
  return ref;
}

Reference to_reference(const Trajectory& trajectory, std::string provenance) {
  return Reference{std::move(provenance), trajectory.times, trajectory.kappa};
}

ErrorReport compare(const Reference& run_output, const Reference& reference) {
  ErrorReport rep;
  std::size_t j = 0;
  for (std::size_t i = 0; i < run_output.times.size(); ++i) {
    const double t = run_output.times[i];
    while (j < reference.times.size() && reference.times[j] < t && !times_match(reference.times[j], t)) ++j;
    if (j == reference.times.size() || !times_match(reference.times[j], t)) {
      std::ostringstream msg;
      msg << "compare: run time " << t << " has no matching reference time";
      throw OracleError(msg.str());
    }
    const ClassField& a = run_output.values[i];
    const ClassField& b = reference.values[j];
    if (a.cells() != b.cells()) throw OracleError("compare: cell counts differ");
    if (b.num_classes() < a.num_classes()) throw OracleError("compare: reference has fewer classes");
    const double vol = a.grid().cell_volume();
    std::vector<double> per_class;
    double l1 = 0.0, linf = 0.0;
    for (int k = 1; k <= a.num_classes(); ++k) {
      const auto x = a.cls(k);
      const auto y = b.cls(k);
      double s = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) {
        const double d = std::abs(x[c] - y[c]);
        s += d;
        linf = std::max(linf, d);
      }
      per_class.push_back(s * vol);
      l1 += s * vol;
      rep.max_class_l1 = std::max(rep.max_class_l1, s * vol);
    }
    rep.times.push_back(t);
    rep.l1.push_back(l1);
    rep.linf.push_back(linf);
    rep.class_l1.push_back(std::move(per_class));
    rep.max_l1 = std::max(rep.max_l1, l1);
    rep.max_linf = std::max(rep.max_linf, linf);
  }
  return rep;
}

}  // namespace coagdiff
