#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace mfgkit {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kSummarySchemaVersion = 1;

struct CliOverrides {
    std::string output_dir;  // empty: take from config
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

/// Executes one experiment described by a JSON config. Writes summary.json
/// plus per-command artifacts into the output directory.
/// Exit status: 0 pass/convergence (check-monotone: audit completed),
/// 2 verdict failure, 1 error.
int run_command(const std::string& command, const nlohmann::json& config,
                const CliOverrides& overrides);

/// Loads the config file and dispatches; catches toolkit errors into exit
/// code 1 with a message on stderr.
int run_from_file(const std::string& command, const std::string& config_path,
                  const CliOverrides& overrides);

}  // namespace mfgkit
