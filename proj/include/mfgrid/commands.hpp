#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace mfgrid {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitIo = 2, kExitDivergence = 3, kExitTheory = 4 };

struct CommandOptions {
  std::optional<std::string> config;
  std::optional<std::string> config_b;  ///< bound-map only
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool inject_sign_flip = false;  ///< theory-check test hook
};

/// Runs one subcommand and maps failures to exit codes. Progress goes to
/// `log`, error messages to `err`.
int run_command(std::string_view name, const CommandOptions& options, std::ostream& log, std::ostream& err);

}  // namespace mfgrid
