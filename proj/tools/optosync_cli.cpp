// Command-line front end: optosync {simulate|variance|sweep|oracle|keys} [options]

#include "optosync/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace optosync;

  CLI::App app{"Optomechanical phase anti-synchronization simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  for (const char* name : {"simulate", "variance", "sweep", "oracle"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (created if missing)");
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides the seed key)");
    sub->add_option("--set", overrides, "override one key, e.g. --set eta=2500 (repeatable)");
  }
  app.add_subcommand("keys", "list every configuration key with its default");

  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  if (command == "keys") {
    print_key_reference(std::cout);
    return exit_code::ok;
  }

  KeyValueConfig cfg;
  try {
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    for (const auto& assignment : overrides) cfg.set_assignment(assignment);
    if (seed && command == "oracle") {
      cfg.set("seed", std::to_string(*seed));
    } else if (seed) {
      std::cerr << "note: --seed only affects the oracle command\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_code::config;
  }
  return run_command(command, cfg, out_dir, std::cerr);
}
