#include <cstdlib>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "cotools/errors.hpp"

namespace {

using cotools::Errc;

// Stable exit codes for scripting.
int exit_code(Errc c) {
  switch (c) {
    case Errc::ConfigError:
      return 2;
    case Errc::NonFinite:
    case Errc::NearZeroNorm:
    case Errc::ZeroVariance:
    case Errc::Divergence:
      return 3;
    case Errc::ProvenanceMismatch:
    case Errc::DimMismatch:
    case Errc::FrozenViolation:
      return 4;
    default:
      return 1;
  }
}

std::string flag_name(std::string key) {
  for (char& ch : key) {
    if (ch == '_') ch = '-';
  }
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cotools::cli;
  CLI::App app{"Chain-of-Tools: frozen LM, tool judge and tool retriever"};
  app.require_subcommand(1);

  struct Bound {
    const Command* cmd;
    CLI::App* sub;
    std::string config;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> opts;
  };
  std::vector<Bound> bound;
  bound.reserve(commands().size());
  for (const auto& cmd : commands()) {
    bound.push_back({&cmd, app.add_subcommand(cmd.schema.command, cmd.description), {}, {}, {}});
  }
  for (auto& b : bound) {
    b.sub->add_option("--config", b.config, "JSON config file");
    for (const auto& k : b.cmd->schema.keys) {
      b.opts[k.name] = b.sub->add_option(flag_name(k.name), b.raw[k.name], k.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (auto& b : bound) {
    if (!b.sub->parsed()) continue;
    try {
      FlagValues flags;
      for (const auto& [name, opt] : b.opts) {
        if (opt->count() > 0) flags[name] = b.raw[name];
      }
      const auto cfg = resolve_config(b.cmd->schema, b.config.empty() ? std::nullopt : std::optional(b.config),
                                      flags, std::getenv("COTOOLS_SEED"));
      return b.cmd->run(cfg);
    } catch (const cotools::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return exit_code(e.code());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
