#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gffpin/run_config.hpp"

namespace {

const char* describe(const std::string& command) {
  if (command == "sample") return "Run the heat-bath chain and record pinning observables";
  if (command == "free-energy") return "Estimate the quenched (or annealed) free energy of one box";
  if (command == "gap") return "Quenched against annealed free energy across box sizes";
  if (command == "scaling") return "Homogeneous free energy against the pinning strength";
  if (command == "domination") return "Void probabilities of the pinned set against a Bernoulli field";
  if (command == "box-doubling") return "Replicate variance and sub-box defect under box doubling";
  if (command == "tail") return "Tail of the center height, free and pinned";
  if (command == "variance-d2") return "Center variance against |log eps| in d = 2";
  if (command == "truncation") return "Free energy change from clipping the rewards";
  if (command == "oracle") return "Exact free energy of a small box by the cluster expansion";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian free field with disordered square-well pinning"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", gffpin::version_string());

  std::optional<std::string> config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> given;
  std::string chosen;

  for (const auto& name : gffpin::command_names()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    sub->add_option("-c,--config", config_path, "YAML configuration file")->check(CLI::ExistingFile);
    for (const auto& path : gffpin::config_keys()) {
      const std::string key = path.substr(path.find('.') + 1);
      sub->add_option("--" + key, values[key], "overrides " + path)->group(path.substr(0, path.find('.')));
    }
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gffpin::kExitConfig;
  }

  std::map<std::string, std::string> flags;
  CLI::App* sub = app.get_subcommand(chosen);
  for (const auto& [key, value] : values)
    if (sub->count("--" + key) > 0) flags[key] = value;

  gffpin::RunConfig config;
  try {
    config = gffpin::load_config(config_path, flags, chosen);
  } catch (...) {
    std::string type, message;
    const int code = gffpin::exit_code_for_current_exception(type, message);
    std::cerr << "error (" << type << "): " << message << '\n';
    std::cout << nlohmann::json{{"exit_code", code}, {"type", type}, {"message", message}}.dump() << '\n';
    return code;
  }
  const gffpin::RunOutcome outcome = gffpin::execute(config, std::cout);
  if (outcome.exit_code != 0) std::cout << outcome.result.dump() << '\n';
  return outcome.exit_code;
}
