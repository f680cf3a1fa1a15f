#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rolab/numeric.hpp"

namespace rolab::experiment {

using json = nlohmann::json;

struct RunOptions {
  std::filesystem::path out_dir = "out";
  unsigned threads = 1;
  bool no_cache = false;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<i64> stages;
  std::optional<Rat> tol;
};

struct RunResult {
  json payload;   // deterministic for a fixed (config, command, code version)
  json timings;   // wall-clock metadata, excluded from determinism guarantees

  /// payload with timings attached, as written to report.json.
  json full() const;
};

/// Known experiment sections, in the order `report` executes them.
const std::vector<std::string>& known_commands();

/// Validates the config (path-precise ConfigError), builds the construction,
/// dispatches to the core modules, writes report.json and CSV series under
/// out_dir, and reuses cached section results keyed by content hash.
RunResult run(const std::string& command, const json& config, const RunOptions& options);

}  // namespace rolab::experiment
