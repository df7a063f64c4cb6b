#pragma once

#include <filesystem>
#include <string>

#include "coagdiff/scenario_file.hpp"

namespace testing {

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(SCENARIO_DIR) / name;
}

inline coagdiff::ScenarioFile load(const std::string& name) {
  return coagdiff::load_scenario(scenario_path(name));
}

inline std::filesystem::path tmp_dir(const std::string& name) {
  const auto p = std::filesystem::path(TEST_TMP_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
