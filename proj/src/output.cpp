#include "coagdiff/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef COAGDIFF_VERSION
#define COAGDIFF_VERSION "0.0.0"
#endif

namespace coagdiff {
namespace {

void snapshot_header(std::ostream& out, int dim, bool provenance) {
  if (provenance) out << "provenance,";
  out << "time,class";
  for (int a = 0; a < dim; ++a) out << ",cell_" << a;
  out << ",density\n";
}

void snapshot_rows(std::ostream& out, double t, const ClassField& field, const std::string* provenance) {
  const SpatialGrid& grid = field.grid();
  const std::string ts = format_number(t);
  for (int k = 1; k <= field.num_classes(); ++k) {
    const auto values = field.cls(k);
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (provenance) out << *provenance << ',';
      out << ts << ',' << k;
      const auto idx = grid.unravel(c);
      for (int a = 0; a < grid.dim(); ++a) out << ',' << idx[static_cast<std::size_t>(a)];
      out << ',' << format_number(values[c]) << '\n';
    }
  }
}

}  // namespace

const char* library_version() { return COAGDIFF_VERSION; }

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_diagnostics_csv(std::ostream& out, const Diagnostics& diagnostics) {
  out << "t,mass_mu,mass_lambda,eta_l1,wmom_l1,wmom_inf,w2_sup,bound_horizon_ok,bound_global_ok,"
         "clip_mass\n";
  for (const DiagnosticsRow& r : diagnostics.rows) {
    out << format_number(r.t) << ',' << format_number(r.mass_mu) << ','
        << format_number(r.mass_lambda) << ',' << format_number(r.eta_l1) << ','
        << format_number(r.wmom_l1) << ',' << format_number(r.wmom_inf) << ','
        << format_number(r.w2_sup) << ',' << (r.bound_horizon_ok ? 1 : 0) << ',';
    if (r.bound_global_ok) out << (*r.bound_global_ok ? "1" : "0");
    else out << "na";
    out << ',' << format_number(r.clip_mass) << '\n';
  }
}

void write_snapshots_csv(std::ostream& out, const std::vector<double>& times,
                         const std::vector<ClassField>& fields) {
  if (fields.empty()) {
    snapshot_header(out, 1, false);
    return;
  }
  snapshot_header(out, fields.front().grid().dim(), false);
  for (std::size_t i = 0; i < fields.size(); ++i) snapshot_rows(out, times[i], fields[i], nullptr);
}

void write_reference_csv(std::ostream& out, const Reference& reference) {
  const int dim = reference.values.empty() ? 1 : reference.values.front().grid().dim();
  snapshot_header(out, dim, true);
  for (std::size_t i = 0; i < reference.values.size(); ++i)
    snapshot_rows(out, reference.times[i], reference.values[i], &reference.provenance);
}

nlohmann::json horizon_to_json(const Horizon& horizon) {
  nlohmann::json j;
  j["alpha"] = horizon.alpha;
  if (std::isinf(horizon.zeta_lower)) j["zeta_lower"] = nullptr;
  else j["zeta_lower"] = horizon.zeta_lower;
  return j;
}

nlohmann::json run_manifest(const ScenarioFile& file, const Diagnostics& diagnostics,
                            const nlohmann::json& files) {
  const Scenario& s = file.scenario;
  nlohmann::json m;
  m["version"] = library_version();
  m["scenario"] = file.source;
  m["resolved"] = {
      {"model", model_to_json(s.model)},
      {"integrator", to_string(s.integrator)},
      {"dt", s.dt},
      {"t_end", s.t_end},
      {"steps", s.steps()},
      {"cadence", s.cadence},
      {"picard_tol", s.picard_tol},
      {"picard_kmax", s.picard_kmax},
      {"max_coag_substeps", s.max_coag_substeps},
      {"monitor_tolerance", s.monitor_tolerance},
      {"force", s.force},
  };
  m["defaults"] = {
      {"stability_factor", kStabilityFactor},
      {"splitting_order", "coagulation(dt/2), diffusion(dt), coagulation(dt/2)"},
      {"coagulation_substep", "ssp-rk2"},
      {"duhamel_quadrature", "trapezoidal"},
      {"picard_initial_iterate", "diffused state"},
      {"negative_policy", "clip-to-zero"},
      {"overflow_routing", "product class i+j"},
      {"propagator", "wrapped gaussian, separable circulant, midpoint sampled, row normalised"},
      {"admissibility_tolerance", 1e-12},
      {"phi_sample_points", 97},
      {"oracle_blowup_guard", 1e12},
  };
  m["horizon"] = horizon_to_json(diagnostics.horizon);
  m["t_end_beyond_horizon"] = diagnostics.t_end_beyond_horizon;
  m["horizon_bound_tripped"] = diagnostics.horizon_bound_tripped;
  m["global_bound_tripped"] = diagnostics.global_bound_tripped;
  if (diagnostics.growth_constant) m["growth_constant"] = *diagnostics.growth_constant;
  else m["growth_constant"] = nullptr;
  m["total_coagulation_substeps"] = diagnostics.total_substeps;
  m["total_picard_iterations"] = diagnostics.total_picard_iterations;
  m["files"] = files;
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace coagdiff
