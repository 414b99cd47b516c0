#include "gffpin/run_config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gffpin/environment.hpp"
#include "gffpin/error.hpp"
#include "gffpin/estimators.hpp"
#include "gffpin/experiments.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/sampler.hpp"

#ifndef GFFPIN_GIT
#define GFFPIN_GIT "unknown"
#endif

namespace gffpin {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommandName {
  Command command;
  const char* name;
};

constexpr CommandName kCommands[] = {
    {Command::sample, "sample"},           {Command::free_energy, "free-energy"}, {Command::gap, "gap"},
    {Command::scaling, "scaling"},         {Command::domination, "domination"},   {Command::box_doubling, "box-doubling"},
    {Command::tail, "tail"},               {Command::variance_d2, "variance-d2"}, {Command::truncation, "truncation"},
    {Command::oracle, "oracle"}};

}  // namespace

std::string to_string(Command command) {
  for (const auto& c : kCommands)
    if (c.command == command) return c.name;
  return "?";
}

Command parse_command(const std::string& name) {
  for (const auto& c : kCommands)
    if (name == c.name) return c.command;
  std::string list;
  for (const auto& c : kCommands) list += (list.empty() ? "" : ", ") + std::string(c.name);
  throw ConfigError("command: unknown command '" + name + "' (expected one of " + list + ")");
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : kCommands) v.emplace_back(c.name);
    return v;
  }();
  return names;
}

namespace {

std::string to_lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string scalar_text(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) bad(path, "expected a scalar value");
  return node.Scalar();
}

double as_double(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar_text(node, path);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  bad(path, "expected a finite number, got '" + s + "'");
}

long long as_int(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar_text(node, path);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used, 10);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  bad(path, "expected an integer, got '" + s + "'");
}

std::uint64_t as_u64(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar_text(node, path);
  if (!s.empty() && s[0] != '-') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used, 0);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  bad(path, "expected a non-negative integer, got '" + s + "'");
}

bool as_bool(const YAML::Node& node, const std::string& path) {
  const std::string s = to_lower_copy(scalar_text(node, path));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  bad(path, "expected true or false, got '" + s + "'");
}

// A sequence, or a scalar holding comma-separated values (the flag form).
std::vector<YAML::Node> as_list(const YAML::Node& node, const std::string& path) {
  std::vector<YAML::Node> out;
  if (node.IsSequence()) {
    for (const auto& item : node) out.push_back(item);
  } else if (node.IsScalar()) {
    std::stringstream ss(node.Scalar());
    std::string item;
    while (std::getline(ss, item, ',')) out.emplace_back(item);
  } else {
    bad(path, "expected a list");
  }
  if (out.empty()) bad(path, "expected a non-empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const YAML::Node&, const std::string&)>;

struct KeySpec {
  std::string section;
  std::string key;
  Setter set;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"model", "d", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto d = as_int(v, p);
         if (d < 1 || d > 16) bad(p, "must be an integer in [1, 16]");
         c.d = static_cast<int>(d);
       }},
      {"model", "n", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto n = as_int(v, p);
         if (n < 1 || n > (1 << 20)) bad(p, "must be an integer >= 1");
         c.n = static_cast<int>(n);
       }},
      {"model", "a", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.a = as_double(v, p);
         if (!(c.a > 0.0)) bad(p, "well half-width must be > 0");
       }},
      {"model", "b", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.b = as_double(v, p);
         if (c.b < 0.0) bad(p, "disorder intensity must be >= 0");
       }},
      {"model", "h", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.h = as_double(v, p); }},
      {"model", "law", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.law = to_lower_copy(scalar_text(v, p));
         if (c.law != "bernoulli" && c.law != "gaussian" && c.law != "two_point" && c.law != "constant")
           bad(p, "unknown law '" + c.law + "' (expected bernoulli, gaussian, two_point, constant)");
       }},
      {"model", "p", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.p = as_double(v, p);
         if (!(c.p > 0.0 && c.p < 1.0)) bad(p, "must lie in (0, 1)");
       }},
      {"model", "annealed", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.annealed = as_bool(v, p); }},
      {"estimator", "method", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.method = scalar_text(v, p);
         try {
           parse_estimator_method(c.method);
         } catch (const ConfigError& e) {
           bad(p, e.what());
         }
       }},
      {"estimator", "nodes", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto k = as_int(v, p);
         if (k < 1 || k > 256) bad(p, "must be an integer in [1, 256]");
         c.nodes = static_cast<int>(k);
       }},
      {"estimator", "sweeps", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.sweeps = as_u64(v, p);
         if (c.sweeps == 0) bad(p, "budget must be > 0");
       }},
      {"estimator", "max_sweeps", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.max_sweeps = as_u64(v, p);
         if (c.max_sweeps == 0) bad(p, "budget must be > 0");
       }},
      {"estimator", "burn_in", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.burn_in = as_u64(v, p); }},
      {"estimator", "samples", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.samples = as_u64(v, p);
         if (c.samples == 0) bad(p, "budget must be > 0");
       }},
      {"estimator", "overrelax", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto k = as_int(v, p);
         if (k < 0 || k > 64) bad(p, "must be an integer in [0, 64]");
         c.overrelax = static_cast<int>(k);
       }},
      {"estimator", "blocks", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.blocks = as_u64(v, p);
         if (c.blocks < kMinBlocks) bad(p, "must be >= 8");
       }},
      {"estimator", "rao_blackwell",
       [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.rao_blackwell = as_bool(v, p); }},
      {"experiment", "sizes", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.sizes.clear();
         for (const auto& item : as_list(v, p)) {
           const auto n = as_int(item, p);
           if (n < 1) bad(p, "sizes must be >= 1");
           c.sizes.push_back(static_cast<int>(n));
         }
       }},
      {"experiment", "replicates", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto r = as_int(v, p);
         if (r < 2 || r > 1'000'000) bad(p, "must be an integer >= 2");
         c.replicates = static_cast<int>(r);
       }},
      {"experiment", "grid", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.grid.clear();
         for (const auto& item : as_list(v, p)) c.grid.push_back(as_double(item, p));
       }},
      {"experiment", "thresholds", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.thresholds.clear();
         for (const auto& item : as_list(v, p)) c.thresholds.push_back(as_double(item, p));
       }},
      {"experiment", "eps", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.eps = as_double(v, p);
         if (!(c.eps > 0.0)) bad(p, "must be > 0");
       }},
      {"experiment", "c1", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         c.c1 = as_double(v, p);
         if (!(c.c1 > 0.0)) bad(p, "must be > 0");
       }},
      {"parallelism", "workers", [](RunConfig& c, const YAML::Node& v, const std::string& p) {
         const auto w = as_int(v, p);
         if (w < 1 || w > 4096) bad(p, "must be an integer in [1, 4096]");
         c.workers = static_cast<unsigned>(w);
       }},
      {"seeds", "env_seed", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.env_seed = as_u64(v, p); }},
      {"seeds", "dyn_seed", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.dyn_seed = as_u64(v, p); }},
      {"output", "out_dir", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.out_dir = scalar_text(v, p); }},
      {"output", "run_dir", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.run_dir = scalar_text(v, p); }},
      {"output", "env_file", [](RunConfig& c, const YAML::Node& v, const std::string& p) { c.env_file = scalar_text(v, p); }},
  };
  return specs;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& s : key_specs())
    if (s.key == key) return &s;
  return nullptr;
}

bool is_section(const std::string& name) {
  for (const auto& s : key_specs())
    if (s.section == name) return true;
  return false;
}

RunConfig defaults_for(Command command) {
  RunConfig c;
  c.command = command;
  switch (command) {
    case Command::oracle:
      c.n = 2;
      c.b = 1.0;
      break;
    case Command::free_energy: break;
    case Command::sample:
      c.n = 16;
      c.sweeps = 10000;
      break;
    case Command::gap: {
      const GapExperimentSpec s;
      c.law = s.law.name();
      c.a = s.params.a, c.b = s.params.b, c.h = s.params.h, c.d = s.d;
      c.sizes = s.sizes;
      c.replicates = s.replicates;
      c.c1 = s.c1;
      break;
    }
    case Command::scaling: {
      const AnnealedScalingSpec s;
      c.d = s.d, c.n = s.n, c.a = s.a;
      c.grid = s.ells;
      break;
    }
    case Command::domination: {
      const DominationSpec s;
      c.d = s.d, c.n = s.n, c.a = s.a;
      c.grid = s.eps;
      c.sweeps = s.chain.sweeps;
      c.overrelax = s.chain.overrelax;
      break;
    }
    case Command::box_doubling: {
      const BoxDoublingSpec s;
      c.law = s.law.name();
      c.a = s.params.a, c.b = s.params.b, c.h = s.params.h, c.d = s.d;
      c.sizes = s.sizes;
      c.replicates = s.replicates;
      break;
    }
    case Command::tail: {
      const TailSpec s;
      c.d = s.d, c.a = s.a;
      c.sizes = s.sizes;
      c.eps = s.eps;
      c.thresholds = s.thresholds;
      c.sweeps = s.chain.sweeps;
      c.overrelax = s.chain.overrelax;
      break;
    }
    case Command::variance_d2: {
      const VarianceD2Spec s;
      c.d = 2, c.n = s.n, c.a = s.a;
      c.grid = s.eps;
      c.sweeps = s.chain.sweeps;
      c.overrelax = s.chain.overrelax;
      break;
    }
    case Command::truncation: {
      const TruncationSpec s;
      c.law = s.law.name();
      c.a = s.params.a, c.b = s.params.b, c.h = s.params.h, c.d = s.d, c.n = s.n;
      c.grid = s.cutoffs;
      break;
    }
  }
  c.workers = default_worker_count();
  return c;
}

std::string node_text(const YAML::Node& node) {
  YAML::Emitter e;
  e << YAML::Flow << node;
  return e.c_str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> v;
    for (const auto& s : key_specs()) v.push_back(s.section + "." + s.key);
    return v;
  }();
  return keys;
}

RunConfig parse_config(const std::string& yaml_text, const std::map<std::string, std::string>& flags,
                       const std::optional<std::string>& command) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML parse error: ") + e.what());
  }
  if (!root.IsNull() && !root.IsMap()) throw ConfigError("config: expected a mapping at top level");

  // key -> (path, node) from the file
  std::map<std::string, std::pair<std::string, YAML::Node>> file;
  std::optional<std::string> file_command;
  auto record = [&](const std::string& key, const std::string& path, const YAML::Node& value) {
    if (file.count(key)) throw ConfigError(path + ": key given more than once");
    file.emplace(key, std::make_pair(path, value));
  };
  if (root.IsMap()) {
    for (const auto& kv : root) {
      const std::string name = kv.first.as<std::string>();
      if (name == "command") {
        file_command = scalar_text(kv.second, "command");
      } else if (is_section(name) && kv.second.IsMap()) {
        for (const auto& inner : kv.second) {
          const std::string key = inner.first.as<std::string>();
          const KeySpec* spec = find_key(key);
          if (spec == nullptr || spec->section != name) throw ConfigError(name + "." + key + ": unknown key");
          record(key, name + "." + key, inner.second);
        }
      } else if (const KeySpec* spec = find_key(name)) {
        record(name, spec->section + "." + name, kv.second);
      } else {
        throw ConfigError(name + ": unknown key");
      }
    }
  }

  const auto chosen = command ? command : file_command;
  if (!chosen) throw ConfigError("command: missing (give it as a subcommand or a 'command' key)");
  RunConfig cfg = defaults_for(parse_command(*chosen));
  if (command && file_command && *command != *file_command)
    cfg.overrides["command"] = {{"file", *file_command}, {"flag", *command}};

  bool env_seed_set = false, dyn_seed_set = false;
  for (const auto& [key, entry] : file) {
    find_key(key)->set(cfg, entry.second, entry.first);
    env_seed_set |= key == "env_seed";
    dyn_seed_set |= key == "dyn_seed";
  }
  for (const auto& [key, text] : flags) {
    const KeySpec* spec = find_key(key);
    if (spec == nullptr) throw ConfigError("--" + key + ": unknown option");
    YAML::Node value;
    try {
      value = YAML::Load(text);
    } catch (const YAML::Exception&) {
      value = YAML::Node(text);
    }
    if (value.IsNull()) value = YAML::Node(text);
    spec->set(cfg, value, spec->section + "." + key);
    json o = {{"flag", text}};
    if (const auto it = file.find(key); it != file.end()) o["file"] = node_text(it->second.second);
    cfg.overrides[spec->section + "." + key] = o;
    env_seed_set |= key == "env_seed";
    dyn_seed_set |= key == "dyn_seed";
  }

  if (!env_seed_set || !dyn_seed_set) {
    std::random_device rd;
    auto draw = [&] { return (static_cast<std::uint64_t>(rd()) << 32) ^ rd(); };
    if (!env_seed_set) cfg.env_seed = draw();
    if (!dyn_seed_set) cfg.dyn_seed = draw();
    cfg.seeds_generated = true;
  }

  try {
    DisorderLaw::from_name(cfg.law, cfg.p);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.law: ") + e.what());
  }
  if (cfg.command == Command::variance_d2 && cfg.d != 2) throw ConfigError("model.d: variance-d2 runs in d = 2");
  if (cfg.sweeps < cfg.blocks) throw ConfigError("estimator.sweeps: must be at least estimator.blocks");
  return cfg;
}

RunConfig load_config(const std::optional<std::string>& path, const std::map<std::string, std::string>& flags,
                      const std::optional<std::string>& command) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("config: cannot read " + *path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(text, flags, command);
}

json config_json(const RunConfig& c) {
  return {{"command", to_string(c.command)},
          {"model",
           {{"d", c.d}, {"n", c.n}, {"a", c.a}, {"b", c.b}, {"h", c.h}, {"law", c.law}, {"p", c.p}, {"annealed", c.annealed}}},
          {"estimator",
           {{"method", c.method},
            {"nodes", c.nodes},
            {"sweeps", c.sweeps},
            {"max_sweeps", c.max_sweeps},
            {"burn_in", c.burn_in ? json(*c.burn_in) : json(nullptr)},
            {"samples", c.samples},
            {"overrelax", c.overrelax},
            {"blocks", c.blocks},
            {"rao_blackwell", c.rao_blackwell}}},
          {"experiment",
           {{"sizes", c.sizes},
            {"replicates", c.replicates},
            {"grid", c.grid},
            {"thresholds", c.thresholds},
            {"eps", c.eps},
            {"c1", c.c1}}},
          {"parallelism", {{"workers", c.workers}}},
          {"seeds", {{"env_seed", c.env_seed}, {"dyn_seed", c.dyn_seed}}},
          {"output", {{"out_dir", c.out_dir}, {"run_dir", c.run_dir}, {"env_file", c.env_file}}}};
}

std::string config_yaml(const RunConfig& c) {
  const json j = config_json(c);
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap << YAML::Key << "command" << YAML::Value << to_string(c.command);
  for (const char* section : {"model", "estimator", "experiment", "parallelism", "seeds", "output"}) {
    e << YAML::Key << section << YAML::Value << YAML::BeginMap;
    for (const auto& [key, value] : j.at(section).items()) {
      if (value.is_null()) continue;
      if (value.is_array() && value.empty()) continue;
      if (value.is_string() && value.get<std::string>().empty()) continue;
      if (key == "replicates" && value.get<int>() == 0) continue;
      e << YAML::Key << key << YAML::Value;
      if (value.is_array()) {
        e << YAML::Flow << YAML::BeginSeq;
        for (const auto& item : value) {
          if (item.is_number_integer()) {
            e << item.get<long long>();
          } else {
            e << item.get<double>();
          }
        }
        e << YAML::EndSeq;
      } else if (value.is_boolean()) {
        e << value.get<bool>();
      } else if (value.is_number_unsigned()) {
        e << value.get<std::uint64_t>();
      } else if (value.is_number_integer()) {
        e << value.get<long long>();
      } else if (value.is_number_float()) {
        e << value.get<double>();
      } else {
        e << value.get<std::string>();
      }
    }
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::string version_string() { return std::string("gffpin ") + GFFPIN_VERSION + " (" + GFFPIN_GIT + ")"; }

int exit_code_for_current_exception(std::string& type, std::string& message) {
  try {
    throw;
  } catch (const ConfigError& e) {
    type = "config";
    message = e.what();
    return kExitConfig;
  } catch (const StatisticsGuardError& e) {
    type = "statistics_guard";
    message = e.what();
    return kExitStatistics;
  } catch (const AssumptionViolation& e) {
    type = "assumption_violation";
    message = e.what();
    return kExitNumerical;
  } catch (const NumericalError& e) {
    type = "numerical";
    message = e.what();
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    type = "config";
    message = e.what();
    return kExitConfig;
  } catch (const std::exception& e) {
    type = "internal";
    message = e.what();
    return 1;
  }
}

namespace {

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string config_hash(const RunConfig& c) {
  json j = config_json(c);
  j.erase("output");
  j.erase("parallelism");  // results do not depend on the worker count
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf).substr(0, 12);
}

fs::path make_run_dir(const RunConfig& c) {
  fs::path dir;
  if (!c.run_dir.empty()) {
    dir = c.run_dir;
  } else {
    const fs::path base = fs::path(c.out_dir) / (utc_stamp() + "-" + config_hash(c));
    dir = base;
    for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

DisorderLaw law_of(const RunConfig& c) { return DisorderLaw::from_name(c.law, c.p); }
PinningParams params_of(const RunConfig& c) { return {c.a, c.b, c.h}; }

ThermoOptions thermo_of(const RunConfig& c) {
  ThermoOptions o;
  o.nodes = c.nodes;
  o.burn_in = c.burn_in;
  o.sweeps = c.sweeps;
  o.max_sweeps = std::max(c.max_sweeps, c.sweeps);
  o.blocks = c.blocks;
  o.seed = c.dyn_seed;
  o.rao_blackwell = c.rao_blackwell;
  o.overrelax = c.overrelax;
  return o;
}

ChainOptions chain_of(const RunConfig& c) { return {c.burn_in, c.sweeps, c.overrelax, c.blocks}; }

EnvironmentRealization environment_of(const RunConfig& c, const Box& box) {
  if (!c.env_file.empty()) {
    EnvironmentRealization env = load_environment(c.env_file);
    if (env.d != box.dim() || env.n != box.side()) throw ConfigError("output.env_file: environment box does not match model d, n");
    if (env.params.a != c.a) throw ConfigError("output.env_file: environment a does not match model.a");
    return env;
  }
  if (c.annealed) {
    const double ell = annealed_strength(law_of(c), params_of(c)).ell;
    EnvironmentRealization env = homogeneous_environment(box, c.a, ell);
    env.seed = c.env_seed;
    return env;
  }
  return sample_environment(law_of(c), params_of(c), box, c.env_seed);
}

const std::vector<std::string> kEstimateColumns = {"method", "d", "n", "a", "b", "h", "law",
                                                   "seed", "t_nodes", "value", "std_error", "sweeps", "wall_time"};

ReportTable estimate_table(const RunConfig& c, const FreeEnergyEstimate& e, double wall) {
  ReportTable t;
  t.columns = kEstimateColumns;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", wall);
  t.add({to_string(e.method), c.d, c.n, c.a, c.b, c.h, c.annealed ? "annealed:" + c.law : c.law, c.env_seed,
         e.diagnostics.quadrature_nodes, e.value, e.std_error, e.diagnostics.sweeps, std::string(buf)});
  return t;
}

void write_table(const fs::path& path, const ReportTable& table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_csv(out, table);
}

json estimate_record(const FreeEnergyEstimate& e) {
  return {{"method", to_string(e.method)},
          {"value", e.value},
          {"std_error", e.std_error},
          {"diagnostics",
           {{"quadrature_nodes", e.diagnostics.quadrature_nodes},
            {"sweeps", e.diagnostics.sweeps},
            {"samples", e.diagnostics.samples},
            {"effective_sample_size", e.diagnostics.effective_sample_size},
            {"max_tau", e.diagnostics.max_tau},
            {"max_drift_z", e.diagnostics.max_drift_z}}}};
}

json run_free_energy(const RunConfig& c, const fs::path& dir, WorkerPool& pool, std::ostream& log, bool oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto box = std::make_shared<const Box>(build_box(c.d, c.n));
  const EnvironmentRealization env = environment_of(c, *box);
  save_environment((dir / "environment.txt").string(), env);
  const EstimatorMethod method = oracle ? EstimatorMethod::oracle_expansion : parse_estimator_method(c.method);
  FreeEnergyEstimate est;
  std::vector<ThermoNode> nodes;
  switch (method) {
    case EstimatorMethod::thermo_integration: {
      ThermoResult r = free_energy_thermo(Model(box, env), thermo_of(c), &pool);
      est = r.estimate;
      nodes = std::move(r.nodes);
      break;
    }
    case EstimatorMethod::importance: {
      ImportanceOptions o;
      o.samples = c.samples;
      o.seed = c.dyn_seed;
      est = free_energy_importance(Model(box, env), o, &pool);
      break;
    }
    case EstimatorMethod::oracle_expansion: est = free_energy_expansion(*box, env.rewards, env.params.a); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_table(dir / "estimates.csv", estimate_table(c, est, wall));
  if (!nodes.empty()) {
    ReportTable t;
    t.columns = {"t", "weight", "integrand", "integrand_se", "tau", "sweeps", "drift_z"};
    for (const auto& nd : nodes) t.add({nd.t, nd.weight, nd.integrand.mean, nd.integrand.error, nd.tau, nd.sweeps, nd.drift_z});
    write_table(dir / "nodes.csv", t);
  }
  char line[128];
  std::snprintf(line, sizeof line, "f = %.6f +/- %.2g (%s)", est.value, est.std_error, to_string(method).c_str());
  log << line << '\n';
  json rec = estimate_record(est);
  if (oracle) {
    OracleFixture fx;
    fx.d = c.d, fx.n = c.n, fx.a = env.params.a, fx.law = env.law.name(), fx.b = env.params.b, fx.h = env.params.h;
    fx.env_seed = env.seed, fx.f_exact = est.value, fx.tol = est.std_error, fx.generator_version = oracle_generator_version();
    rec["fixture"] = fx;
  }
  write_json(dir / "result.json", rec);
  return rec;
}

json run_sample(const RunConfig& c, const fs::path& dir, WorkerPool& pool, std::ostream& log) {
  const auto box = std::make_shared<const Box>(build_box(c.d, c.n));
  const EnvironmentRealization env = environment_of(c, *box);
  save_environment((dir / "environment.txt").string(), env);
  const Model model(box, env);
  FieldState state = FieldState::zeros(*box, c.dyn_seed);
  const std::uint64_t burn = c.burn_in.value_or(default_burn_in(*box));
  auto step = [&] {
    for (int k = 0; k < c.overrelax; ++k) overrelax_sweep(state, model, &pool);
    return sweep(state, model, SweepOrder::checkerboard, &pool);
  };
  for (std::uint64_t s = 0; s < burn; ++s) step();
  const auto centre = central_sites(*box);
  ReportTable t;
  t.columns = {"sweep", "pinned_density", "pin_probability_density", "energy", "phi_center"};
  std::vector<double> density, prob, energy, centre_sq;
  for (std::uint64_t s = 0; s < c.sweeps; ++s) {
    const SweepSummary summary = step();
    const PinnedSet set = pinned_set(state, c.a);
    const double vol = static_cast<double>(box->volume());
    density.push_back(static_cast<double>(set.cardinality()) / vol);
    prob.push_back(summary.pin / vol);
    energy.push_back(hamiltonian(state, *box));
    double m2 = 0.0;
    for (SiteIndex x : centre) m2 += state.phi[x] * state.phi[x];
    centre_sq.push_back(m2 / static_cast<double>(centre.size()));
    t.add({state.sweep_count, density.back(), prob.back(), energy.back(), state.phi[box->center()]});
  }
  write_table(dir / "observables.csv", t);
  save_snapshot((dir / "field.snap").string(), *box, state);
  auto summary = [&](std::vector<double> v) {
    const ObservableSeries s = summarize_series(std::move(v), c.blocks);
    return json{{"mean", s.estimate.mean}, {"std_error", s.estimate.error}, {"tau", s.tau}};
  };
  json rec = {{"burn_in", burn},
              {"sweeps", c.sweeps},
              {"pinned_density", summary(density)},
              {"pin_probability_density", summary(prob)},
              {"energy", summary(energy)},
              {"center_second_moment", summary(centre_sq)}};
  write_json(dir / "summary.json", rec);
  char line[160];
  std::snprintf(line, sizeof line, "pinned density = %.6f +/- %.2g over %llu sweeps",
                rec["pinned_density"]["mean"].get<double>(), rec["pinned_density"]["std_error"].get<double>(),
                static_cast<unsigned long long>(c.sweeps));
  log << line << '\n';
  return rec;
}

ExperimentReport run_experiment(const RunConfig& c, WorkerPool& pool) {
  switch (c.command) {
    case Command::gap: {
      GapExperimentSpec s;
      s.law = law_of(c), s.params = params_of(c), s.d = c.d, s.sizes = c.sizes, s.replicates = c.replicates;
      s.env_seed = c.env_seed, s.dyn_seed = c.dyn_seed, s.c1 = c.c1, s.thermo = thermo_of(c);
      return run_gap_experiment(s, &pool);
    }
    case Command::scaling: {
      AnnealedScalingSpec s;
      s.d = c.d, s.n = c.n, s.a = c.a, s.ells = c.grid, s.seed = c.dyn_seed, s.thermo = thermo_of(c);
      return run_annealed_scaling(s, &pool);
    }
    case Command::domination: {
      DominationSpec s;
      s.d = c.d, s.n = c.n, s.a = c.a, s.eps = c.grid, s.seed = c.dyn_seed, s.chain = chain_of(c);
      return run_domination_test(s, &pool);
    }
    case Command::box_doubling: {
      BoxDoublingSpec s;
      s.law = law_of(c), s.params = params_of(c), s.d = c.d, s.sizes = c.sizes, s.replicates = c.replicates;
      s.env_seed = c.env_seed, s.dyn_seed = c.dyn_seed, s.thermo = thermo_of(c);
      return run_box_doubling(s, &pool);
    }
    case Command::tail: {
      TailSpec s;
      s.d = c.d, s.sizes = c.sizes, s.a = c.a, s.eps = c.eps, s.thresholds = c.thresholds, s.seed = c.dyn_seed;
      s.chain = chain_of(c);
      return run_tail_check(s, &pool);
    }
    case Command::variance_d2: {
      VarianceD2Spec s;
      s.n = c.n, s.a = c.a, s.eps = c.grid, s.seed = c.dyn_seed, s.chain = chain_of(c);
      return run_variance_d2(s, &pool);
    }
    case Command::truncation: {
      TruncationSpec s;
      s.law = law_of(c), s.params = params_of(c), s.d = c.d, s.n = c.n, s.cutoffs = c.grid;
      s.env_seed = c.env_seed, s.dyn_seed = c.dyn_seed, s.thermo = thermo_of(c);
      return run_truncation_check(s, &pool);
    }
    default: throw ConfigError("command: not an experiment");
  }
}

}  // namespace

RunOutcome execute(const RunConfig& config, std::ostream& log) {
  RunOutcome out;
  fs::path dir;
  try {
    dir = make_run_dir(config);
    out.run_dir = dir.string();
    json manifest = {{"version", version_string()},
                     {"command", to_string(config.command)},
                     {"config", config_json(config)},
                     {"overrides", config.overrides},
                     {"seeds", {{"env_seed", config.env_seed}, {"dyn_seed", config.dyn_seed}, {"generated", config.seeds_generated}}},
                     {"workers", config.workers},
                     {"started_utc", utc_stamp()},
                     {"reproduce", "gffpin " + to_string(config.command) + " --config " + (dir / "config.yaml").string()}};
    write_json(dir / "manifest.json", manifest);
    write_text(dir / "config.yaml", config_yaml(config));

    WorkerPool pool(config.workers);
    switch (config.command) {
      case Command::oracle: out.result = run_free_energy(config, dir, pool, log, true); break;
      case Command::free_energy: out.result = run_free_energy(config, dir, pool, log, false); break;
      case Command::sample: out.result = run_sample(config, dir, pool, log); break;
      default: {
        const ExperimentReport report = run_experiment(config, pool);
        write_table(dir / "points.csv", report.points);
        out.result = report.verdict();
        write_json(dir / "verdict.json", out.result);
        log << report.experiment << ": " << (report.pass ? "PASS" : "FAIL") << ' ' << report.fits.dump() << '\n';
        for (const auto& note : report.notes) log << "  note: " << note << '\n';
      }
    }
    log << "run directory: " << dir.string() << '\n';
  } catch (...) {
    std::string type, message;
    out.exit_code = exit_code_for_current_exception(type, message);
    out.result = {{"exit_code", out.exit_code}, {"type", type}, {"message", message}, {"command", to_string(config.command)}};
    if (!dir.empty() && fs::exists(dir)) {
      try {
        write_json(dir / "error.json", out.result);
      } catch (...) {
      }
    }
    log << "error (" << type << "): " << message << '\n';
  }
  return out;
}

}  // namespace gffpin
