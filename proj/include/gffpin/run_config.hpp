#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gffpin {

enum class Command { sample, free_energy, gap, scaling, domination, box_doubling, tail, variance_d2, truncation, oracle };

std::string to_string(Command command);
Command parse_command(const std::string& name);
const std::vector<std::string>& command_names();

/// Fully resolved run configuration. Files use sections model / estimator / experiment /
/// parallelism / seeds / output, or the same keys flat at top level.
struct RunConfig {
  Command command = Command::oracle;

  // model
  int d = 2;
  int n = 8;
  double a = 1.0;
  double b = 0.0;
  double h = 0.0;
  std::string law = "bernoulli";
  double p = 0.5;          // two_point only
  bool annealed = false;   // free-energy: homogeneous model at strength l instead of the quenched one

  // estimator
  std::string method = "thermo";
  int nodes = 16;
  std::uint64_t sweeps = 4000;
  std::uint64_t max_sweeps = 64000;
  std::optional<std::uint64_t> burn_in;
  std::uint64_t samples = 1'000'000;
  int overrelax = 0;
  std::uint64_t blocks = 32;
  bool rao_blackwell = true;

  // experiment
  std::vector<int> sizes;
  int replicates = 0;
  std::vector<double> grid;
  std::vector<double> thresholds;
  double eps = 0.1;
  double c1 = 1.0;

  unsigned workers = 1;

  std::uint64_t env_seed = 0;
  std::uint64_t dyn_seed = 0;
  bool seeds_generated = false;

  std::string out_dir = "runs";
  std::string run_dir;   // explicit run directory; empty means out_dir/<timestamp>-<hash>
  std::string env_file;  // reuse a saved environment instead of sampling one

  /// Keys set on the command line, with the file value they replaced if any.
  nlohmann::json overrides = nlohmann::json::object();
};

/// Every accepted key as "section.key".
const std::vector<std::string>& config_keys();

/// Builds a config from YAML text plus flag overrides (key -> YAML scalar or list text,
/// keys flat as in config_keys without the section). The command comes from `command`
/// when given, otherwise from the file. Throws ConfigError naming the offending key path.
RunConfig parse_config(const std::string& yaml_text, const std::map<std::string, std::string>& flags,
                       const std::optional<std::string>& command = std::nullopt);

RunConfig load_config(const std::optional<std::string>& path, const std::map<std::string, std::string>& flags,
                      const std::optional<std::string>& command = std::nullopt);

nlohmann::json config_json(const RunConfig& config);
/// YAML that parse_config reads back into the same config.
std::string config_yaml(const RunConfig& config);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitStatistics = 4;

struct RunOutcome {
  int exit_code = kExitOk;
  std::string run_dir;
  nlohmann::json result;  // verdict or estimate record; the error record on failure
};

/// Runs the command, writing manifest.json, config.yaml and the command's CSV/JSON files
/// into the run directory. Failures are returned as an exit code plus error.json, not thrown.
RunOutcome execute(const RunConfig& config, std::ostream& log);

/// Exit code for the exception currently being handled.
int exit_code_for_current_exception(std::string& type, std::string& message);

std::string version_string();

}  // namespace gffpin
