#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tcp {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs argv[0] (PATH lookup) with optional stdin contents and working
/// directory; captures stdout and stderr. Throws Errc::Io if the process
/// cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::optional<std::string>& stdin_data = std::nullopt,
                          const std::optional<std::filesystem::path>& cwd = std::nullopt);

}  // namespace tcp
