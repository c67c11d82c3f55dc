#include <iostream>
#include <vector>

#include "command.hpp"
#include "morphbert/common/hash.hpp"

namespace morphbert::cli {

std::string config_digest(const CLI::App& app) {
  std::string canonical;
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_group() == kOutputGroup) continue;
    const std::string name = opt->get_name();
    if (name == "--help" || name == "--config" || name == "--threads") continue;
    canonical += name;
    canonical += '=';
    if (opt->count() > 0) {
      for (const std::string& r : opt->results()) {
        canonical += r;
        canonical += '\x1f';
      }
    } else {
      canonical += opt->get_default_str();
    }
    canonical += '\n';
  }
  return to_hex(fnv1a64(canonical));
}

Provenance provenance(const CLI::App& app, std::uint64_t seed) {
  return {app.get_name(), seed, config_digest(app)};
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::out | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace morphbert::cli

int main(int argc, char** argv) {
  using namespace morphbert::cli;
  CLI::App app{"Corpus, vocabulary, masking, parsing-codec and evaluation pipeline", "morphbert"};
  app.set_version_flag("--version", std::string(morphbert::tool_version()));
  app.set_config("--config", "", "TOML file with option values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  std::vector<Command> commands;
  register_corpus_commands(app, commands);
  register_data_commands(app, commands);
  register_dep_commands(app, commands);
  register_eval_commands(app, commands);
  register_gap_commands(app, commands);

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      c.run();
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "morphbert " << c.app->get_name() << ": " << e.what() << '\n'
                << "Run with --help for more information.\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "morphbert " << c.app->get_name() << ": error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
