#include "gffpin/environment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/rng.hpp"

namespace gffpin {

namespace {
constexpr double kMomentTol = 1e-9;
constexpr const char* kEnvMagic = "# gffpin environment v1";
}  // namespace

DisorderLaw DisorderLaw::two_point(double p, double v_minus, double v_plus) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("two_point law needs p in (0,1)");
  const double mean = p * v_minus + (1.0 - p) * v_plus;
  const double second = p * v_minus * v_minus + (1.0 - p) * v_plus * v_plus;
  if (std::fabs(mean) > kMomentTol || std::fabs(second - 1.0) > kMomentTol)
    throw ConfigError("two_point law must have mean 0 and variance 1");
  return DisorderLaw(LawKind::two_point, p, v_minus, v_plus);
}

DisorderLaw DisorderLaw::two_point(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("two_point law needs p in (0,1)");
  return two_point(p, -std::sqrt((1.0 - p) / p), std::sqrt(p / (1.0 - p)));
}

DisorderLaw DisorderLaw::from_name(const std::string& name, double p) {
  if (name == "bernoulli") return bernoulli();
  if (name == "gaussian") return gaussian();
  if (name == "constant") return constant();
  if (name == "two_point") return two_point(p);
  throw ConfigError("unknown disorder law '" + name + "' (expected bernoulli, gaussian, two_point, constant)");
}

std::string DisorderLaw::name() const {
  switch (kind_) {
    case LawKind::bernoulli: return "bernoulli";
    case LawKind::gaussian: return "gaussian";
    case LawKind::two_point: return "two_point";
    case LawKind::constant: return "constant";
  }
  return "?";
}

double DisorderLaw::draw(double u) const {
  switch (kind_) {
    case LawKind::bernoulli: return u < 0.5 ? -1.0 : 1.0;
    case LawKind::gaussian: return normal_quantile(u);
    case LawKind::two_point: return u < p_ ? v_minus_ : v_plus_;
    case LawKind::constant: return 0.0;
  }
  return 0.0;
}

double DisorderLaw::log_mgf(double b) const {
  double value = 0.0;
  switch (kind_) {
    case LawKind::bernoulli: {
      const double x = std::fabs(b);
      value = x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
      break;
    }
    case LawKind::gaussian: value = 0.5 * b * b; break;
    case LawKind::two_point:
      value = log_add_exp(std::log(p_) + b * v_minus_, std::log1p(-p_) + b * v_plus_);
      break;
    case LawKind::constant: value = 0.0; break;
  }
  if (!std::isfinite(value))
    throw AssumptionViolation("E exp(b e) is not finite for law " + name() + " at b=" + std::to_string(b));
  return value;
}

void PinningParams::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("a must be a finite number > 0");
  if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("b must be a finite number >= 0");
  if (!std::isfinite(h)) throw ConfigError("h must be finite");
}

EnvironmentRealization sample_environment(const DisorderLaw& law, const PinningParams& params, const Box& box,
                                          std::uint64_t seed) {
  params.validate();
  EnvironmentRealization env{law, params, seed, box.dim(), box.side(), {}};
  env.rewards.resize(box.volume());
  for (SiteIndex x = 0; x < box.volume(); ++x) {
    CounterStream rng(seed, StreamDomain::environment, 0, x);
    env.rewards[x] = params.b * law.draw(rng.uniform()) + params.h;
  }
  return env;
}

EnvironmentRealization homogeneous_environment(const Box& box, double a, double reward) {
  PinningParams params{a, 0.0, reward};
  params.validate();
  return {DisorderLaw::constant(), params, 0, box.dim(), box.side(), std::vector<double>(box.volume(), reward)};
}

AnnealedStrength annealed_strength(const DisorderLaw& law, const PinningParams& params) {
  return {params.h + law.log_mgf(params.b)};
}

std::vector<double> tilt_factors(const EnvironmentRealization& env, AnnealedStrength ell) {
  std::vector<double> gamma(env.rewards.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = std::exp(env.rewards[i] - ell.ell);
  return gamma;
}

void write_environment(std::ostream& out, const EnvironmentRealization& env) {
  nlohmann::json header = {{"law", env.law.name()},
                           {"p", env.law.p()},
                           {"v_minus", env.law.v_minus()},
                           {"v_plus", env.law.v_plus()},
                           {"a", env.params.a},
                           {"b", env.params.b},
                           {"h", env.params.h},
                           {"seed", env.seed},
                           {"d", env.d},
                           {"n", env.n},
                           {"volume", env.rewards.size()}};
  out << kEnvMagic << '\n' << header.dump() << '\n';
  char buf[32];
  for (double w : env.rewards) {
    std::snprintf(buf, sizeof buf, "%.17g", w);
    out << buf << '\n';
  }
}

EnvironmentRealization read_environment(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEnvMagic) throw ConfigError("not a gffpin environment file");
  if (!std::getline(in, line)) throw ConfigError("environment file is missing its header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad environment header: ") + e.what());
  }
  EnvironmentRealization env;
  const auto law_name = header.at("law").get<std::string>();
  env.law = law_name == "two_point"
                ? DisorderLaw::two_point(header.at("p"), header.at("v_minus"), header.at("v_plus"))
                : DisorderLaw::from_name(law_name);
  env.params = {header.at("a"), header.at("b"), header.at("h")};
  env.seed = header.at("seed");
  env.d = header.at("d");
  env.n = header.at("n");
  const std::size_t volume = header.at("volume");
  env.rewards.reserve(volume);
  while (env.rewards.size() < volume && std::getline(in, line)) env.rewards.push_back(std::stod(line));
  if (env.rewards.size() != volume) throw ConfigError("environment file truncated");
  return env;
}

void save_environment(const std::string& path, const EnvironmentRealization& env) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_environment(out, env);
}

EnvironmentRealization load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_environment(in);
}

}  // namespace gffpin
