#include "coagdiff/coagulation.hpp"

#include <algorithm>
#include <string>

namespace coagdiff {
namespace {

void check_live(const ClassField& kappa, const Model& model) {
  if (kappa.num_classes() != model.num_classes())
    throw ShapeError("live state has " + std::to_string(kappa.num_classes()) +
                     " classes, model truncation is " + std::to_string(model.num_classes()));
}

void gather(const ClassField& f, std::size_t cell, std::span<double> out) {
  for (int k = 1; k <= f.num_classes(); ++k) out[static_cast<std::size_t>(k - 1)] = f.at(k, cell);
}

}  // namespace

void gain_cell(const Model& model, std::span<const double> kappa_cell, std::span<double> out) {
  const int m = model.num_classes();
  std::fill(out.begin(), out.end(), 0.0);
  for (int k = 2; k <= 2 * m; ++k) {
    double acc = 0.0;
    const int lo = std::max(1, k - m);
    const int hi = std::min(m, k - 1);
    for (int i = lo; i <= hi; ++i)
      acc += model.kernel(i, k - i) * kappa_cell[static_cast<std::size_t>(i - 1)] *
             kappa_cell[static_cast<std::size_t>(k - i - 1)];
    out[static_cast<std::size_t>(k - 1)] = 0.5 * acc;
  }
}

void loss_rate_cell(const Model& model, std::span<const double> kappa_cell, double eta,
                    std::span<double> c_out) {
  const int m = model.num_classes();
  for (int i = 1; i <= m; ++i) {
    double acc = 0.0;
    for (int j = 1; j <= m; ++j) acc += model.kernel(i, j) * kappa_cell[static_cast<std::size_t>(j - 1)];
    c_out[static_cast<std::size_t>(i - 1)] = acc + model.weight(i) * eta;
  }
}

std::vector<double> gain(const ClassField& kappa, const Model& model, std::size_t cell) {
  check_live(kappa, model);
  std::vector<double> k(static_cast<std::size_t>(model.num_classes()));
  gather(kappa, cell, k);
  std::vector<double> g(static_cast<std::size_t>(model.table_classes()));
  gain_cell(model, k, g);
  return g;
}

std::vector<double> loss(const ClassField& kappa, const Model& model, std::size_t cell) {
  check_live(kappa, model);
  std::vector<double> k(static_cast<std::size_t>(model.num_classes()));
  gather(kappa, cell, k);
  std::vector<double> l(k.size());
  loss_rate_cell(model, k, 0.0, l);
  for (std::size_t i = 0; i < l.size(); ++i) l[i] *= k[i];
  return l;
}

CoagFlux truncated_flux(const ClassField& kappa, const DefectState& lambda, const Model& model,
                        FluxOptions options) {
  check_live(kappa, model);
  if (lambda.num_classes() != model.table_classes() || !(lambda.grid() == kappa.grid()))
    throw ShapeError("defect state does not match the live state");
  const int m = model.num_classes();
  const auto mm = static_cast<std::size_t>(m);
  CoagFlux flux{ClassField(kappa.grid(), m), ClassField(kappa.grid(), 2 * m)};
  std::vector<double> k(mm), g(2 * mm), c(mm);
  const auto& eta = lambda.eta();
  for (std::size_t cell = 0; cell < kappa.cells(); ++cell) {
    gather(kappa, cell, k);
    gain_cell(model, k, g);
    if (options.gain_only) {
      for (int i = 1; i <= m; ++i) flux.dkappa.at(i, cell) = g[static_cast<std::size_t>(i - 1)];
      continue;
    }
    loss_rate_cell(model, k, eta[cell], c);
    for (int i = 1; i <= m; ++i) {
      const auto u = static_cast<std::size_t>(i - 1);
      flux.dkappa.at(i, cell) = g[u] - c[u] * k[u];
      flux.dlambda.at(i, cell) = model.weight(i) * eta[cell] * k[u];
    }
    for (int i = m + 1; i <= 2 * m; ++i) flux.dlambda.at(i, cell) = g[static_cast<std::size_t>(i - 1)];
  }
  return flux;
}

ClassField c_field(const ClassField& kappa, const DefectState& lambda, const Model& model) {
  check_live(kappa, model);
  const auto mm = static_cast<std::size_t>(model.num_classes());
  ClassField out(kappa.grid(), model.num_classes());
  std::vector<double> k(mm), c(mm);
  for (std::size_t cell = 0; cell < kappa.cells(); ++cell) {
    gather(kappa, cell, k);
    loss_rate_cell(model, k, lambda.eta()[cell], c);
    for (int i = 1; i <= model.num_classes(); ++i) out.at(i, cell) = c[static_cast<std::size_t>(i - 1)];
  }
  return out;
}

double c_max(const ClassField& kappa, const DefectState& lambda, const Model& model) {
  const ClassField c = c_field(kappa, lambda, model);
  double best = 0.0;
  for (double x : c.raw()) best = std::max(best, x);
  return best;
}

}  // namespace coagdiff
