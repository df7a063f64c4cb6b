// Cellwise coagulation operators: gain K+, loss K-, and the truncated system
// in which products heavier than M leave the live population for the defect
// population, and defect mass converts live particles at rate w_k * eta.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coagdiff/state.hpp"
#include "coagdiff/typespace.hpp"

namespace coagdiff {

struct CoagFlux {
  ClassField dkappa;   // classes 1..M, signed
  ClassField dlambda;  // classes 1..2M, >= 0
};

struct FluxOptions {
  /// Drop loss, conversion and overflow: dkappa = gain on 1..M, dlambda = 0.
  bool gain_only = false;
};

/// g_k = 1/2 sum_{i+j=k, i,j<=M} K(i,j) kappa_i kappa_j for k = 1..2M (index k-1).
std::vector<double> gain(const ClassField& kappa, const Model& model, std::size_t cell);

/// l_i = kappa_i sum_{j<=M} K(i,j) kappa_j for i = 1..M. No 1/2: ordered pairs.
std::vector<double> loss(const ClassField& kappa, const Model& model, std::size_t cell);

/// Single-cell forms on a class vector (kappa_cell[i-1] = kappa_i, i <= M).
void gain_cell(const Model& model, std::span<const double> kappa_cell, std::span<double> out);
void loss_rate_cell(const Model& model, std::span<const double> kappa_cell, double eta,
                    std::span<double> c_out);

CoagFlux truncated_flux(const ClassField& kappa, const DefectState& lambda, const Model& model,
                        FluxOptions options = {});

/// c_i(cell) = sum_{j<=M} K(i,j) kappa_j(cell) + w_i eta(cell), classes 1..M.
ClassField c_field(const ClassField& kappa, const DefectState& lambda, const Model& model);

/// Largest entry of c_field, without materialising it.
double c_max(const ClassField& kappa, const DefectState& lambda, const Model& model);

}  // namespace coagdiff
