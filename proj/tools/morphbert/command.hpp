#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "morphbert/common/text_io.hpp"

namespace morphbert::cli {

// Options in this group are left out of the config digest, so writing the
// same run to a different place does not change the provenance line.
inline constexpr const char* kOutputGroup = "Output";

// Raised for conditions the user must fix in the invocation itself
// (exit status 2), as opposed to stage failures (exit status 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

// Digest of every non-output option value (defaults included) of `app`.
std::string config_digest(const CLI::App& app);

Provenance provenance(const CLI::App& app, std::uint64_t seed);

// Opens for writing, creating parent directories; throws on failure.
std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out);

void register_corpus_commands(CLI::App& root, std::vector<Command>& out);
void register_data_commands(CLI::App& root, std::vector<Command>& out);
void register_dep_commands(CLI::App& root, std::vector<Command>& out);
void register_eval_commands(CLI::App& root, std::vector<Command>& out);
void register_gap_commands(CLI::App& root, std::vector<Command>& out);

}  // namespace morphbert::cli
