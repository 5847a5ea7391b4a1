#pragma once

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace painscope::cli {

/// Shared by every subcommand.
struct Common {
  std::uint64_t seed = 20250801;
  int verbosity = 0;
};

using Runner = std::function<int()>;

/// Each registers its subcommands on `app` and stores the selected action.
void add_batch_commands(CLI::App& app, Common& common, Runner& run);
void add_realtime_commands(CLI::App& app, Common& common, Runner& run);

/// Relative inputs that do not exist locally are looked up under $PAINSCOPE_DATA_DIR.
std::filesystem::path resolve_input(const std::filesystem::path& p);

/// Reproducibility header on standard error.
void announce(std::string_view manifest_hash, std::uint64_t seed);

}  // namespace painscope::cli
