#include <cstdlib>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>

#include "cli.hpp"
#include "painscope/error.hpp"

namespace painscope::cli {

std::filesystem::path resolve_input(const std::filesystem::path& p) {
  if (p.is_absolute() || std::filesystem::exists(p)) return p;
  if (const char* dir = std::getenv("PAINSCOPE_DATA_DIR")) {
    const auto candidate = std::filesystem::path(dir) / p;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return p;
}

void announce(std::string_view manifest_hash, std::uint64_t seed) {
  spdlog::info("manifest {} seed {}", manifest_hash.empty() ? "-" : manifest_hash, seed);
}

}  // namespace painscope::cli

int main(int argc, char** argv) {
  using namespace painscope;
  spdlog::set_default_logger(spdlog::stderr_color_mt("painscope"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"painscope: EEG pain-state classification, offline evaluation and live monitoring"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "painscope 1.0");
  cli::Common common;
  app.add_option("--seed", common.seed, "Seed for every stochastic step")->capture_default_str();
  app.add_flag("-v,--verbose", common.verbosity, "More logging (repeatable)");
  app.add_flag_callback("-q,--quiet", [&] { common.verbosity = -1; }, "Warnings and errors only");

  cli::Runner run;
  cli::add_batch_commands(app, common, run);
  cli::add_realtime_commands(app, common, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0 && app.get_subcommands().empty()) std::cerr << app.help();
    return 1;
  }
  spdlog::set_level(common.verbosity < 0 ? spdlog::level::warn
                    : common.verbosity == 0 ? spdlog::level::info
                                            : spdlog::level::debug);
  try {
    return run ? run() : 1;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const CLI::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
