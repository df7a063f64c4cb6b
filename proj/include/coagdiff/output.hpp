// CSV and JSON emission. All numbers are written with 17 significant digits
// so that outputs round-trip and compare byte-for-byte between runs.
#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <json.hpp>

#include "coagdiff/oracles.hpp"
#include "coagdiff/scenario_file.hpp"
#include "coagdiff/solver.hpp"

namespace coagdiff {

std::string format_number(double x);

void write_diagnostics_csv(std::ostream& out, const Diagnostics& diagnostics);

/// time,class,cell_0..,density for every class, cell and stored time.
void write_snapshots_csv(std::ostream& out, const std::vector<double>& times,
                         const std::vector<ClassField>& fields);

/// Snapshot schema with a leading provenance column.
void write_reference_csv(std::ostream& out, const Reference& reference);

/// Everything needed to reproduce a run: the scenario document, the resolved
/// time-stepping settings and every fixed numerical default.
nlohmann::json run_manifest(const ScenarioFile& file, const Diagnostics& diagnostics,
                            const nlohmann::json& files);

nlohmann::json horizon_to_json(const Horizon& horizon);

void write_text_file(const std::filesystem::path& path, const std::string& content);

const char* library_version();

}  // namespace coagdiff
