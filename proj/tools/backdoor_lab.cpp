#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bdlab/lab.hpp"

namespace {

const char* kCommands[] = {"gen-data", "split", "attack", "train-target", "defend",
                           "evaluate", "theorem", "report", "pipeline"};

// Turns leftover `--key value` / `--key=value` arguments into overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& arg = rest[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw bdlab::lab::ConfigError("unexpected argument: " + arg);
    }
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
      continue;
    }
    if (i + 1 >= rest.size()) throw bdlab::lab::ConfigError("missing value for " + arg);
    out.emplace_back(arg.substr(2), rest[++i]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clean-label graph backdoor attack lab"};
  app.allow_extras();
  std::string command;
  std::string config_path;
  bool list_keys = false;
  app.add_option("command", command, "gen-data | split | attack | train-target | defend | evaluate | theorem | report | pipeline");
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_flag("--list-keys", list_keys, "print the documented config keys and exit");
  app.footer("Any config key can be overridden with --key value.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (list_keys) {
    for (const auto& [k, doc] : bdlab::lab::documented_keys()) std::cout << k << "\t" << doc << "\n";
    return 0;
  }

  try {
    if (command.empty()) throw bdlab::lab::ConfigError("missing command");
    bool known = false;
    for (const char* c : kCommands) known = known || command == c;
    if (!known) throw bdlab::lab::ConfigError("unknown command: " + command);
    const auto overrides = parse_overrides(app.remaining());
    auto config = bdlab::lab::parse_config(
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), overrides);
    config.command = command;
    return bdlab::lab::run_command(config);
  } catch (const bdlab::lab::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
