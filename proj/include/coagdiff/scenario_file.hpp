// JSON scenario documents: model, grid, initial data, time stepping, outputs.
// Unknown keys are rejected at every level before any computation runs.
#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coagdiff/solver.hpp"

namespace coagdiff {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct InitComponent {
  int cls = 1;
  double background = 0.0;
  double amplitude = 0.0;  // total number carried by the Gaussian bump
  double sigma = 0.0;
  std::array<double, 3> centre{0.0, 0.0, 0.0};
};

struct InitSpec {
  std::string kind;  // monodisperse | profile | file
  int cls = 1;
  double density = 0.0;
  std::vector<InitComponent> components;
  std::filesystem::path path;
};

struct OutputSpec {
  std::filesystem::path dir = "out";
  bool snapshots = false;
};

struct ScenarioFile {
  Scenario scenario;
  InitSpec init;
  OutputSpec outputs;
  nlohmann::json source;
};

ScenarioFile parse_scenario(const nlohmann::json& doc,
                            const std::filesystem::path& base_dir = ".");
/// Throws SchemaError on unreadable files, malformed JSON or schema violations.
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Reads a single-time state CSV (time,class,cell_0..,density) into the
/// combined measure over classes 1..2M.
ClassField read_state_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                          int num_classes);

}  // namespace coagdiff
