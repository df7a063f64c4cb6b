// Subcommands of the coagdiff tool. Each returns the process exit status:
// 0 ok, 1 check or validation failure, 2 usage or parse error, 3 solver error.
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace coagdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct RunFlags {
  bool force = false;
  std::optional<int> cadence;
  std::optional<std::filesystem::path> out_dir;
};

int cmd_check(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& scenario, const RunFlags& flags, std::ostream& out,
            std::ostream& err);
int cmd_horizon(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err);
/// axis is "dt", "dx" or "M"; levels are time steps, cells per axis or
/// truncation levels respectively (defaults derived from the scenario).
int cmd_converge(const std::filesystem::path& scenario, const std::string& axis,
                 const std::vector<double>& levels, const RunFlags& flags, std::ostream& out,
                 std::ostream& err);
int cmd_oracle(const std::filesystem::path& scenario, const RunFlags& flags, std::ostream& out,
               std::ostream& err);

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coagdiff
