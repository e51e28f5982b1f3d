// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_CLI_HPP_
#define CHANPRUNE_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chanprune/config.hpp"
#include "json.hpp"

namespace chanprune::cli {

/// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kStageFailure = 1;
inline constexpr int kInvalid = 2;

struct Invocation {
  std::string config;                  // path or preset name; empty = schema defaults
  std::vector<std::string> overrides;  // "dotted.key=value"
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "runs";
};

struct RunOutcome {
  int status = kOk;
  std::filesystem::path run_dir;  // empty when validation failed
  nlohmann::json error;           // null on success
};

struct SweepOutcome {
  int status = kOk;
  std::vector<RunOutcome> runs;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> report;
};

/// Loads the config, applies overrides and the seed flag. Throws ConfigError.
Config resolve_config(const Invocation& inv);

/// One end-to-end pipeline run into `out/<run_id>`. The resolved config is
/// written to config.cfg; failures leave error.json and a partial record.
/// Errors are also echoed as one JSON line on `err`.
RunOutcome cmd_run(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Cartesian product of ratios x criteria (either may be empty, not both).
/// Duplicates are dropped with a warning. `parallel` > 1 forks that many
/// worker processes. The combined report lands in `out/report`.
SweepOutcome cmd_sweep(const Invocation& inv, std::vector<double> ratios,
                       std::vector<std::string> criteria, std::size_t parallel,
                       std::ostream& out, std::ostream& err);

/// Combined report over completed run directories.
int cmd_report(const std::vector<std::filesystem::path>& dirs,
               const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chanprune::cli

#endif  // CHANPRUNE_CLI_HPP_
