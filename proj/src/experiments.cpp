#include "gffpin/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/rng.hpp"

namespace gffpin {

using nlohmann::json;

namespace {

constexpr std::uint64_t kAnnealedIndex = std::uint64_t{1} << 32;
constexpr std::uint64_t kScalingTag = 0x5ca1;
constexpr std::uint64_t kDominationTag = 0xd0;
constexpr std::uint64_t kSubBoxTag = 0x5b;
constexpr std::uint64_t kTailTag = 0x7a;
constexpr std::uint64_t kVarianceTag = 0x7ad2;
constexpr std::uint64_t kTruncationTag = 0x7c;

void for_each_job(WorkerPool* pool, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (pool != nullptr) {
    pool->run(jobs, fn);
  } else {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
  }
}

// Burn-in, then `measure` after every measurement step. A step is `overrelax` reflection
// sweeps followed by one heat-bath sweep.
template <class F>
void run_chain(const Model& model, std::uint64_t seed, const ChainOptions& opt, F&& measure) {
  if (opt.sweeps < opt.blocks) throw ConfigError("chain sweeps must be at least the block count");
  if (opt.overrelax < 0) throw ConfigError("over-relaxation count must be >= 0");
  FieldState state = FieldState::zeros(model.box(), seed);
  auto step = [&] {
    for (int k = 0; k < opt.overrelax; ++k) overrelax_sweep(state, model);
    sweep(state, model, SweepOrder::checkerboard);
  };
  const std::uint64_t burn = opt.burn_in.value_or(default_burn_in(model.box()));
  for (std::uint64_t s = 0; s < burn; ++s) step();
  for (std::uint64_t s = 0; s < opt.sweeps; ++s) {
    step();
    measure(state);
  }
}

double log_mix(double log_gamma, double lambda) {
  if (lambda == 1.0) return log_gamma;
  return log_add_exp(std::log(lambda) + log_gamma, std::log1p(-lambda));
}

std::shared_ptr<const Box> make_box(int d, int n) { return std::make_shared<const Box>(build_box(d, n)); }

bool is_homogeneous(const DisorderLaw& law, const PinningParams& params) {
  return law.kind() == LawKind::constant || params.b == 0.0;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

double gap_lambda(const GapBoundSpec& spec) {
  spec.params.validate();
  require(spec.c1 > 0.0 && std::isfinite(spec.c1), "c1 must be > 0");
  const double ell = annealed_strength(spec.law, spec.params).ell;
  require(ell > 0.0, "the gap bound needs l > 0 (got " + std::to_string(ell) + ")");
  if (spec.regime == GapRegime::d3plus) return spec.c1 * ell / (1.0 + spec.c1 * ell);
  require(ell < 1.0, "the d = 2 bound needs l < 1");
  return spec.c1 * ell / std::sqrt(std::fabs(std::log(ell)));
}

double gap_expectation(const DisorderLaw& law, const PinningParams& params, double lambda) {
  require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1] (got " + std::to_string(lambda) + ")");
  params.validate();
  const double ell = annealed_strength(law, params).ell;
  const double b = params.b, h = params.h;
  if (b == 0.0 || law.kind() == LawKind::constant) return 0.0;  // gamma is identically 1
  switch (law.kind()) {
    case LawKind::constant: break;
    case LawKind::bernoulli:
    case LawKind::two_point: {
      const double p = law.p();
      return p * log_mix(b * law.v_minus() + h - ell, lambda) + (1.0 - p) * log_mix(b * law.v_plus() + h - ell, lambda);
    }
    case LawKind::gaussian: {
      auto f = [&](double z) { return normal_pdf(z) * log_mix(b * z + h - ell, lambda); };
      double error = 0.0;
      const double inf = std::numeric_limits<double>::infinity();
      const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, -inf, inf, 20, 1e-12, &error);
      if (!(error <= 1e-8)) throw NumericalError("gap expectation quadrature did not reach 1e-8");
      return value;
    }
  }
  throw ConfigError("unknown disorder law");
}

double evaluate_gap_bound(const GapBoundSpec& spec) {
  const double lambda = gap_lambda(spec);
  if (spec.regime == GapRegime::d3plus) return gap_expectation(spec.law, spec.params, lambda);
  require(lambda < 1.0, "the d = 2 bound needs lambda < 1 (got " + std::to_string(lambda) + ")");
  const double mix = lambda / std::fabs(std::log(lambda));
  require(mix <= 1.0, "the d = 2 bound needs lambda / |log lambda| <= 1, i.e. small l (got " + std::to_string(mix) + ")");
  return gap_expectation(spec.law, spec.params, mix);
}

void ReportTable::add(std::vector<json> row) {
  if (row.size() != columns.size()) throw ConfigError("report row does not match its columns");
  rows.push_back(std::move(row));
}

std::vector<double> ReportTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("no column named " + name);
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const json& cell = row[j];
    if (cell.is_number()) {
      out.push_back(cell.get<double>());
    } else if (cell.is_boolean()) {
      out.push_back(cell.get<bool>() ? 1.0 : 0.0);
    } else {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

json ExperimentReport::verdict() const {
  return {{"experiment", experiment}, {"params", params}, {"fits", fits},
          {"pass", pass},             {"seeds", seeds},   {"notes", notes}};
}

void write_csv(std::ostream& out, const ReportTable& table) {
  for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << table.columns[j];
  out << '\n';
  char buf[32];
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      const json& cell = row[j];
      if (cell.is_number_float()) {
        std::snprintf(buf, sizeof buf, "%.17g", cell.get<double>());
        out << buf;
      } else if (cell.is_number()) {
        out << cell.dump();
      } else if (cell.is_boolean()) {
        out << (cell.get<bool>() ? "true" : "false");
      } else if (cell.is_string()) {
        const auto& s = cell.get_ref<const std::string&>();
        if (s.find_first_of(",\"\n") == std::string::npos) {
          out << s;
        } else {
          out << '"';
          for (char c : s) out << (c == '"' ? "\"\"" : std::string(1, c));
          out << '"';
        }
      }
    }
    out << '\n';
  }
}

std::vector<SiteIndex> central_sites(const Box& box) {
  const int n = box.side(), d = box.dim();
  std::vector<int> choices = n % 2 ? std::vector<int>{n / 2} : std::vector<int>{n / 2 - 1, n / 2};
  std::vector<SiteIndex> out;
  std::vector<int> coords(d);
  const std::size_t combos = static_cast<std::size_t>(std::pow(choices.size(), d));
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (int k = 0; k < d; ++k) {
      coords[k] = choices[rest % choices.size()];
      rest /= choices.size();
    }
    out.push_back(box.encode(coords));
  }
  return out;
}

ScalingReport run_gap_experiment(const GapExperimentSpec& spec, WorkerPool* pool) {
  require(!spec.sizes.empty(), "gap experiment needs at least one box size");
  require(spec.replicates >= 2, "gap experiment needs at least two replicates");
  spec.params.validate();
  const double ell = annealed_strength(spec.law, spec.params).ell;
  require(ell > 0.0, "gap experiment needs l > 0 (got " + std::to_string(ell) + ")");

  ScalingReport r;
  r.experiment = "gap";
  r.params = {{"law", spec.law.name()}, {"a", spec.params.a}, {"b", spec.params.b}, {"h", spec.params.h},
              {"d", spec.d},            {"sizes", spec.sizes}, {"replicates", spec.replicates},
              {"c1", spec.c1},          {"ell", ell},          {"t_nodes", spec.thermo.nodes}};
  r.seeds = {spec.env_seed, spec.dyn_seed};
  r.points.columns = {"n", "replicate", "kind", "env_seed", "dyn_seed", "value", "std_error", "sweeps"};

  const auto reps = static_cast<std::size_t>(spec.replicates);
  json sizes = json::array();
  double last_gap = 0.0, last_se = 0.0;
  bool all_within = true;
  for (int n : spec.sizes) {
    const auto box = make_box(spec.d, n);
    std::vector<FreeEnergyEstimate> est(reps + 1);
    std::vector<std::uint64_t> env_seeds(reps + 1, 0), dyn_seeds(reps + 1, 0);
    for_each_job(pool, reps + 1, [&](std::size_t j) {
      ThermoOptions opt = spec.thermo;
      if (j < reps) {
        env_seeds[j] = derive_seed(spec.env_seed, static_cast<std::uint64_t>(n), j);
        dyn_seeds[j] = opt.seed = derive_seed(spec.dyn_seed, static_cast<std::uint64_t>(n), j);
        const auto env = sample_environment(spec.law, spec.params, *box, env_seeds[j]);
        est[j] = free_energy_thermo(Model(box, env), opt).estimate;
      } else {
        dyn_seeds[j] = opt.seed = derive_seed(spec.dyn_seed, static_cast<std::uint64_t>(n), kAnnealedIndex);
        est[j] = free_energy_thermo(Model(box, std::vector<double>(box->volume(), ell), spec.params.a), opt).estimate;
      }
    });
    std::vector<double> q;
    for (std::size_t j = 0; j <= reps; ++j) {
      const bool annealed = j == reps;
      r.points.add({n, annealed ? json(nullptr) : json(j), annealed ? "annealed" : "quenched",
                    annealed ? json(nullptr) : json(env_seeds[j]), dyn_seeds[j], est[j].value, est[j].std_error,
                    est[j].diagnostics.sweeps});
      if (!annealed) q.push_back(est[j].value);
    }
    const double mean = sample_mean(q);
    const double se = std::sqrt(sample_variance(q).mean / static_cast<double>(q.size()));
    const FreeEnergyEstimate& fa = est[reps];
    last_gap = mean - fa.value;
    last_se = std::hypot(se, fa.std_error);
    all_within = all_within && std::fabs(last_gap) <= 3.0 * last_se;
    sizes.push_back({{"n", n},
                     {"mean_quenched", mean},
                     {"se_quenched", se},
                     {"annealed", fa.value},
                     {"se_annealed", fa.std_error},
                     {"gap", last_gap},
                     {"gap_se", last_se}});
  }
  r.fits["sizes"] = sizes;

  std::optional<double> bound;
  try {
    GapBoundSpec b{spec.law, spec.params, spec.d >= 3 ? GapRegime::d3plus : GapRegime::d2, spec.c1};
    bound = evaluate_gap_bound(b);
    r.fits["lambda"] = gap_lambda(b);
    r.fits["bound"] = *bound;
  } catch (const ConfigError& e) {
    r.fits["bound"] = nullptr;
    r.notes.push_back(std::string("bound not evaluated: ") + e.what());
  }

  if (is_homogeneous(spec.law, spec.params)) {
    r.pass = all_within;
    r.notes.push_back("no disorder: the gap must vanish within noise at every size");
  } else {
    r.pass = last_gap <= 3.0 * last_se && bound.has_value() && *bound < 0.0;
  }
  return r;
}

ScalingReport run_annealed_scaling(const AnnealedScalingSpec& spec, WorkerPool* pool) {
  require(!spec.ells.empty(), "annealed scaling needs an l grid");
  require(spec.a > 0.0, "a must be > 0");
  for (double ell : spec.ells) {
    require(ell >= 0.0 && std::isfinite(ell), "annealed scaling needs l >= 0");
    require(spec.d >= 3 || ell < 1.0, "the d = 2 form needs l < 1");
  }
  ScalingReport r;
  r.experiment = "scaling";
  r.params = {{"d", spec.d}, {"n", spec.n}, {"a", spec.a}, {"ells", spec.ells}, {"t_nodes", spec.thermo.nodes}};
  r.seeds = {spec.seed};
  r.points.columns = {"ell", "x", "value", "std_error", "sweeps", "in_fit"};

  const auto box = make_box(spec.d, spec.n);
  std::vector<FreeEnergyEstimate> est(spec.ells.size());
  for_each_job(pool, est.size(), [&](std::size_t i) {
    ThermoOptions opt = spec.thermo;
    opt.seed = derive_seed(spec.seed, kScalingTag, i);
    est[i] = free_energy_thermo(Model(box, std::vector<double>(box->volume(), spec.ells[i]), spec.a), opt).estimate;
  });

  std::vector<std::size_t> order(est.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return spec.ells[i] < spec.ells[j]; });

  std::vector<double> xs, ys;
  bool zero_ok = true;
  for (std::size_t i : order) {
    const double ell = spec.ells[i];
    const double x = spec.d >= 3 || ell == 0.0 ? ell : ell / std::sqrt(std::fabs(std::log(ell)));
    const bool in_fit = ell > 0.0 && est[i].std_error < 0.2 * std::fabs(est[i].value);
    if (ell == 0.0) zero_ok = zero_ok && est[i].value == 0.0;
    r.points.add({ell, x, est[i].value, est[i].std_error, est[i].diagnostics.sweeps, in_fit});
    if (in_fit) {
      xs.push_back(x);
      ys.push_back(est[i].value);
    }
  }
  bool monotone = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& lo = est[order[k - 1]];
    const auto& hi = est[order[k]];
    monotone = monotone && hi.value >= lo.value - 3.0 * std::hypot(lo.std_error, hi.std_error);
  }
  r.fits["form"] = spec.d >= 3 ? "f = C l" : "f = C l / sqrt|log l|";
  r.fits["monotone"] = monotone;
  r.fits["zero_point_exact"] = zero_ok;
  if (xs.size() >= 2) {
    const LinearFit fit = fit_line(xs, ys, true);
    r.fits["constant"] = fit.slope;
    r.fits["constant_error"] = fit.slope_error;
    r.fits["r2"] = fit.r2;
    r.fits["points"] = fit.points;
    r.pass = fit.r2 >= spec.min_r2 && monotone && zero_ok;
  } else {
    r.notes.push_back("fewer than two points pass the SE guard; no verdict");
    r.pass = false;
  }
  return r;
}

DominationReport run_domination_test(const DominationSpec& spec, WorkerPool* pool) {
  require(spec.n >= 4, "domination test needs n >= 4");
  require(spec.a > 0.0, "a must be > 0");
  for (double e : spec.eps) require(e >= 0.0 && e < 1.0, "eps must lie in [0, 1)");
  const auto box = make_box(spec.d, spec.n);

  std::vector<int> c1(spec.d, spec.n / 2), c2(spec.d, spec.n / 2);
  c1[0] = spec.n / 4;
  c2[0] = spec.n - 1 - spec.n / 4;
  const std::vector<std::pair<std::string, std::vector<SiteIndex>>> sets = {
      {"single", {box->encode(c1)}},
      {"pair", {box->encode(c1), box->encode(c2)}},
      {"block", central_sites(*box)}};

  DominationReport r;
  r.experiment = "domination";
  r.params = {{"d", spec.d}, {"n", spec.n}, {"a", spec.a}, {"eps", spec.eps}, {"sweeps", spec.chain.sweeps},
              {"overrelax", spec.chain.overrelax}};
  r.seeds = {spec.seed};
  r.points.columns = {"eps", "set", "size", "nu_void", "nu_void_se", "raw_void", "raw_void_se",
                      "rate", "rate_se", "flagged", "bernoulli_void"};

  struct SetResult {
    MeanError nu, raw;
  };
  std::vector<std::vector<SetResult>> res(spec.eps.size(), std::vector<SetResult>(sets.size()));
  for_each_job(pool, spec.eps.size(), [&](std::size_t i) {
    const double eps = spec.eps[i];
    const Model model(box, std::vector<double>(box->volume(), std::log1p(eps)), spec.a);
    std::vector<std::vector<double>> nu(sets.size()), raw(sets.size());
    run_chain(model, derive_seed(spec.seed, kDominationTag, i), spec.chain, [&](const FieldState& s) {
      for (std::size_t j = 0; j < sets.size(); ++j) {
        int k = 0;
        for (SiteIndex x : sets[j].second) k += std::fabs(s.phi[x]) <= spec.a;
        // Given the heights, each pinned-in-well site joins A independently with
        // probability eps / (1 + eps), so A misses B with probability (1 + eps)^-k.
        nu[j].push_back(std::pow(1.0 + eps, -k));
        raw[j].push_back(k == 0 ? 1.0 : 0.0);
      }
    });
    for (std::size_t j = 0; j < sets.size(); ++j)
      res[i][j] = {batch_means(nu[j], spec.chain.blocks), batch_means(raw[j], spec.chain.blocks)};
  });

  json per_eps = json::array();
  std::vector<double> ratios;
  for (std::size_t i = 0; i < spec.eps.size(); ++i) {
    const double eps = spec.eps[i];
    double sxy = 0.0, sxx = 0.0, var = 0.0;
    std::vector<bool> flagged(sets.size(), false);
    std::vector<double> rate(sets.size()), rate_se(sets.size());
    for (std::size_t j = 0; j < sets.size(); ++j) {
      const auto& nu = res[i][j].nu;
      const double size = static_cast<double>(sets[j].second.size());
      rate[j] = nu.mean > 0.0 ? -std::log(nu.mean) / size : std::numeric_limits<double>::infinity();
      rate_se[j] = nu.mean > 0.0 ? nu.error / (nu.mean * size) : std::numeric_limits<double>::infinity();
      flagged[j] = eps > 0.0 && !(rate_se[j] <= 0.2 * rate[j]);
      if (eps > 0.0 && !flagged[j]) {
        sxy += size * size * rate[j];
        sxx += size * size;
        var += std::pow(size * size * rate_se[j], 2);
      }
    }
    const double lambda = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
    const double lambda_se = sxx > 0.0 ? std::sqrt(var) / sxx : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < sets.size(); ++j) {
      const double size = static_cast<double>(sets[j].second.size());
      const json bern = std::isfinite(lambda) ? json(std::pow(1.0 - lambda, size)) : json(nullptr);
      r.points.add({eps, sets[j].first, sets[j].second.size(), res[i][j].nu.mean, res[i][j].nu.error,
                    res[i][j].raw.mean, res[i][j].raw.error, rate[j], rate_se[j], static_cast<bool>(flagged[j]), bern});
    }
    json entry = {{"eps", eps}};
    const auto& single = res[i][0];
    const auto& pair = res[i][1];
    entry["raw_pair_vs_single_sq"] = single.raw.mean > 0.0 && pair.raw.mean > 0.0
                                         ? json(std::log(pair.raw.mean) / (2.0 * std::log(single.raw.mean)))
                                         : json(nullptr);
    entry["raw_rate_single"] = single.raw.mean > 0.0 ? json(-std::log(single.raw.mean)) : json(nullptr);
    if (eps > 0.0) {
      const double g = spec.d >= 3 ? eps : eps / std::sqrt(std::fabs(std::log(eps)));
      entry["g"] = g;
      entry["nu_pair_vs_single_sq"] = flagged[0] || flagged[1] ? json(nullptr) : json(rate[1] / rate[0]);
      if (std::isfinite(lambda)) {
        entry["lambda"] = lambda;
        entry["lambda_se"] = lambda_se;
        entry["ratio"] = lambda / g;
        ratios.push_back(lambda / g);
      } else {
        entry["lambda"] = nullptr;
        r.notes.push_back("insufficient statistics at eps=" + std::to_string(eps));
      }
    } else {
      entry["note"] = "free-field baseline";
    }
    per_eps.push_back(entry);
  }
  r.fits["per_eps"] = per_eps;
  if (ratios.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    r.fits["c_minus"] = *lo;
    r.fits["c_plus"] = *hi;
    r.fits["spread"] = *hi / *lo;
    r.pass = *lo > 0.0 && *hi / *lo < spec.max_spread;
  } else {
    r.notes.push_back("fewer than two eps values with usable statistics; no verdict");
    r.pass = false;
  }
  return r;
}

ScalingReport run_box_doubling(const BoxDoublingSpec& spec, WorkerPool* pool) {
  require(spec.sizes.size() >= 2, "box doubling needs at least two sizes");
  require(spec.replicates >= 2, "box doubling needs at least two replicates");
  for (int n : spec.sizes) require(n >= 2 && n % 2 == 0, "box doubling needs even sizes >= 2");
  spec.params.validate();

  ScalingReport r;
  r.experiment = "box-doubling";
  r.params = {{"law", spec.law.name()}, {"a", spec.params.a}, {"b", spec.params.b}, {"h", spec.params.h},
              {"d", spec.d},            {"sizes", spec.sizes}, {"replicates", spec.replicates},
              {"t_nodes", spec.thermo.nodes}};
  r.seeds = {spec.env_seed, spec.dyn_seed};
  r.points.columns = {"n", "replicate", "env_seed", "value", "std_error", "sub_mean", "sub_std_error", "defect"};

  const auto reps = static_cast<std::size_t>(spec.replicates);
  const std::size_t subs = std::size_t{1} << spec.d;
  json per_size = json::array();
  std::vector<MeanError> variances, abs_defects;
  for (int n : spec.sizes) {
    const auto box = make_box(spec.d, n);
    const auto sub = make_box(spec.d, n / 2);
    std::vector<std::vector<SiteIndex>> maps;
    for (std::size_t k = 0; k < subs; ++k) {
      std::vector<int> origin(spec.d);
      for (int c = 0; c < spec.d; ++c) origin[c] = (k >> c) & 1 ? n / 2 : 0;
      maps.push_back(embed_sub_box(*box, *sub, origin));
    }
    // Job (replicate, part): part 0 is the full box, part k >= 1 the sub-box k - 1.
    std::vector<FreeEnergyEstimate> est(reps * (subs + 1));
    std::vector<std::uint64_t> env_seeds(reps);
    for (std::size_t j = 0; j < reps; ++j) env_seeds[j] = derive_seed(spec.env_seed, static_cast<std::uint64_t>(n), j);
    for_each_job(pool, est.size(), [&](std::size_t job) {
      const std::size_t j = job / (subs + 1), part = job % (subs + 1);
      const auto env = sample_environment(spec.law, spec.params, *box, env_seeds[j]);
      ThermoOptions opt = spec.thermo;
      const std::uint64_t dyn = derive_seed(spec.dyn_seed, static_cast<std::uint64_t>(n), j);
      if (part == 0) {
        opt.seed = dyn;
        est[job] = free_energy_thermo(Model(box, env), opt).estimate;
      } else {
        opt.seed = derive_seed(dyn, kSubBoxTag, part);
        std::vector<double> w(sub->volume());
        const auto& map = maps[part - 1];
        for (std::size_t x = 0; x < w.size(); ++x) w[x] = env.rewards[map[x]];
        est[job] = free_energy_thermo(Model(sub, std::move(w), spec.params.a), opt).estimate;
      }
    });
    std::vector<double> full, defect, abs_defect;
    for (std::size_t j = 0; j < reps; ++j) {
      const auto& f = est[j * (subs + 1)];
      double mean = 0.0, var = 0.0;
      for (std::size_t k = 1; k <= subs; ++k) {
        mean += est[j * (subs + 1) + k].value;
        var += std::pow(est[j * (subs + 1) + k].std_error, 2);
      }
      mean /= static_cast<double>(subs);
      const double sub_se = std::sqrt(var) / static_cast<double>(subs);
      r.points.add({n, j, env_seeds[j], f.value, f.std_error, mean, sub_se, f.value - mean});
      full.push_back(f.value);
      defect.push_back(f.value - mean);
      abs_defect.push_back(std::fabs(f.value - mean));
    }
    const MeanError v = sample_variance(full);
    const auto se_of_mean = [&](const std::vector<double>& x) {
      return std::sqrt(sample_variance(x).mean / static_cast<double>(x.size()));
    };
    variances.push_back(v);
    abs_defects.push_back({sample_mean(abs_defect), se_of_mean(abs_defect)});
    per_size.push_back({{"n", n},
                        {"mean", sample_mean(full)},
                        {"variance", v.mean},
                        {"variance_se", v.error},
                        {"mean_defect", sample_mean(defect)},
                        {"mean_defect_se", se_of_mean(defect)},
                        {"mean_abs_defect", abs_defects.back().mean},
                        {"mean_abs_defect_se", abs_defects.back().error}});
  }
  r.fits["sizes"] = per_size;
  bool var_decreasing = true;
  for (std::size_t k = 1; k < variances.size(); ++k)
    var_decreasing = var_decreasing && variances[k - 1].mean - variances[k].mean >
                                           std::hypot(variances[k - 1].error, variances[k].error);
  const std::size_t last = abs_defects.size() - 1;
  const bool defect_smaller = abs_defects[last].mean < abs_defects[last - 1].mean;
  r.fits["variance_strictly_decreasing"] = var_decreasing;
  r.fits["defect_smaller_at_largest"] = defect_smaller;
  if (is_homogeneous(spec.law, spec.params))
    r.notes.push_back("no disorder: the across-replicate variance is Monte Carlo noise only");
  r.pass = var_decreasing && defect_smaller;
  return r;
}

ScalingReport run_tail_check(const TailSpec& spec, WorkerPool* pool) {
  require(!spec.sizes.empty(), "tail check needs at least one size");
  require(spec.eps > 0.0, "tail check needs eps > 0");
  require(!spec.thresholds.empty(), "tail check needs thresholds");
  for (int n : spec.sizes) require(n >= 2, "tail check needs n >= 2 (log n > 0)");
  std::vector<double> ts = spec.thresholds;
  std::sort(ts.begin(), ts.end());

  ScalingReport r;
  r.experiment = "tail";
  r.params = {{"d", spec.d}, {"sizes", spec.sizes}, {"a", spec.a}, {"eps", spec.eps}, {"thresholds", ts},
              {"sweeps", spec.chain.sweeps}, {"overrelax", spec.chain.overrelax}};
  r.seeds = {spec.seed};
  r.points.columns = {"n", "model", "T", "exceedance", "std_error"};

  struct Curve {
    std::vector<MeanError> exceed;
    MeanError second;
  };
  const std::size_t jobs = spec.sizes.size() * 2;
  std::vector<Curve> curves(jobs);
  for_each_job(pool, jobs, [&](std::size_t job) {
    const int n = spec.sizes[job / 2];
    const bool pinned = job % 2 == 1;
    const auto box = make_box(spec.d, n);
    const Model model(box, std::vector<double>(box->volume(), pinned ? std::log1p(spec.eps) : 0.0), spec.a);
    const auto centre = central_sites(*box);
    std::vector<std::vector<double>> ex(ts.size());
    std::vector<double> sq;
    run_chain(model, derive_seed(spec.seed, kTailTag, job), spec.chain, [&](const FieldState& s) {
      double m2 = 0.0;
      for (SiteIndex x : centre) m2 += s.phi[x] * s.phi[x];
      sq.push_back(m2 / static_cast<double>(centre.size()));
      for (std::size_t k = 0; k < ts.size(); ++k) {
        double c = 0.0;
        for (SiteIndex x : centre) c += std::fabs(s.phi[x]) > ts[k];
        ex[k].push_back(c / static_cast<double>(centre.size()));
      }
    });
    for (const auto& e : ex) curves[job].exceed.push_back(batch_means(e, spec.chain.blocks));
    curves[job].second = batch_means(sq, spec.chain.blocks);
  });

  bool decreasing = true, below_free = true, convex = true;
  json per_size = json::array();
  std::vector<double> log_n, var_free;
  std::array<std::vector<double>, 2> env_u, env_y;
  for (std::size_t s = 0; s < spec.sizes.size(); ++s) {
    const int n = spec.sizes[s];
    const double ln = std::log(static_cast<double>(n));
    for (int pinned = 0; pinned < 2; ++pinned) {
      const Curve& c = curves[2 * s + pinned];
      std::vector<double> us, ys, yse;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        r.points.add({n, pinned ? "pinned" : "free", ts[k], c.exceed[k].mean, c.exceed[k].error});
        if (k > 0) decreasing = decreasing && c.exceed[k].mean <= c.exceed[k - 1].mean + 3.0 * std::hypot(c.exceed[k].error, c.exceed[k - 1].error);
        if (pinned) {
          const MeanError& f = curves[2 * s].exceed[k];
          below_free = below_free && c.exceed[k].mean <= f.mean + 3.0 * std::hypot(f.error, c.exceed[k].error);
        }
        if (ts[k] > 0.0 && c.exceed[k].mean > 3.0 * c.exceed[k].error && c.exceed[k].mean > 0.0) {
          us.push_back(ts[k] * ts[k] / ln);
          ys.push_back(std::log(c.exceed[k].mean));
          yse.push_back(c.exceed[k].error / c.exceed[k].mean);
          env_u[pinned].push_back(us.back());
          env_y[pinned].push_back(ys.back());
        }
      }
      // Convexity of log-exceedance in T^2: second divided differences >= -3 SE.
      for (std::size_t k = 2; k < us.size(); ++k) {
        const double s1 = (ys[k - 1] - ys[k - 2]) / (us[k - 1] - us[k - 2]);
        const double s2 = (ys[k] - ys[k - 1]) / (us[k] - us[k - 1]);
        const double se = std::sqrt(yse[k - 2] * yse[k - 2] + 4.0 * yse[k - 1] * yse[k - 1] + yse[k] * yse[k]) /
                          std::min(us[k] - us[k - 1], us[k - 1] - us[k - 2]);
        convex = convex && s2 - s1 >= -3.0 * se;
      }
    }
    const auto box = make_box(spec.d, n);
    const SiteIndex centre = central_sites(*box).front();
    const double green = green_column(*box, centre)[centre];
    const MeanError& vf = curves[2 * s].second;
    const MeanError& vp = curves[2 * s + 1].second;
    log_n.push_back(ln);
    var_free.push_back(vf.mean);
    per_size.push_back({{"n", n},
                        {"free_variance", vf.mean},
                        {"free_variance_se", vf.error},
                        {"green_diagonal", green},
                        {"green_z", (vf.mean - green) / std::max(vf.error, kErrorFloor)},
                        {"pinned_variance", vp.mean},
                        {"pinned_variance_se", vp.error}});
  }
  r.fits["sizes"] = per_size;
  if (log_n.size() >= 2) {
    const LinearFit f = fit_line(log_n, var_free);
    r.fits["free_variance_vs_log_n"] = {{"slope", f.slope}, {"slope_error", f.slope_error}, {"r2", f.r2},
                                        {"reference_slope", 2.0 / std::numbers::pi}};
  }
  bool envelope_ok = true;
  for (int pinned = 0; pinned < 2; ++pinned) {
    const char* name = pinned ? "envelope_pinned" : "envelope_free";
    if (env_u[pinned].size() < 2) {
      r.fits[name] = nullptr;
      r.notes.push_back(std::string(name) + ": fewer than two resolved exceedances");
      envelope_ok = false;
      continue;
    }
    const LinearFit f = fit_line(env_u[pinned], env_y[pinned]);
    const double c2 = -f.slope;
    double log_c1 = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < env_u[pinned].size(); ++k) log_c1 = std::max(log_c1, env_y[pinned][k] + c2 * env_u[pinned][k]);
    r.fits[name] = {{"C1", std::exp(log_c1)}, {"C2", c2}, {"r2", f.r2}};
    envelope_ok = envelope_ok && c2 > 0.0;
  }
  r.fits["decreasing"] = decreasing;
  r.fits["convex_in_T2"] = convex;
  r.fits["pinned_below_free"] = below_free;
  r.pass = decreasing && convex && below_free && envelope_ok;
  return r;
}

ScalingReport run_variance_d2(const VarianceD2Spec& spec, WorkerPool* pool) {
  require(spec.n >= 8, "variance check needs n >= 8");
  require(spec.eps.size() >= 2, "variance check needs at least two eps values");
  for (double e : spec.eps) require(e > 0.0 && e < 1.0, "eps must lie in (0, 1)");
  const auto box = make_box(2, spec.n);
  const auto centre = central_sites(*box);
  std::vector<int> seps;
  for (int k = 1; k <= spec.n / 4; ++k) seps.push_back(k);

  ScalingReport r;
  r.experiment = "variance-d2";
  r.params = {{"d", 2}, {"n", spec.n}, {"a", spec.a}, {"eps", spec.eps}, {"sweeps", spec.chain.sweeps},
              {"overrelax", spec.chain.overrelax}};
  r.seeds = {spec.seed};
  r.points.columns = {"eps", "abs_log_eps", "variance", "variance_se", "mean_phi", "mean_phi_se",
                      "mass", "mass_se", "fit_ok", "mass_times_n", "guard_ok"};

  struct Point {
    MeanError var, mean;
    TwoPointEstimate tp;
  };
  std::vector<Point> pts(spec.eps.size());
  for_each_job(pool, pts.size(), [&](std::size_t i) {
    const Model model(box, std::vector<double>(box->volume(), std::log1p(spec.eps[i])), spec.a);
    TwoPointAccumulator acc(*box, box->center(), 0, seps);
    std::vector<double> sq, first;
    run_chain(model, derive_seed(spec.seed, kVarianceTag, i), spec.chain, [&](const FieldState& s) {
      double m1 = 0.0, m2 = 0.0;
      for (SiteIndex x : centre) {
        m1 += s.phi[x];
        m2 += s.phi[x] * s.phi[x];
      }
      first.push_back(m1 / static_cast<double>(centre.size()));
      sq.push_back(m2 / static_cast<double>(centre.size()));
      acc.add(s);
    });
    // The law is symmetric under phi -> -phi, so the mean is exactly 0 and the second
    // moment is the variance; the measured first moment is reported as a check.
    pts[i] = {batch_means(sq, spec.chain.blocks), batch_means(first, spec.chain.blocks), acc.finish(spec.chain.blocks)};
  });

  std::vector<double> xs, ys;
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return spec.eps[i] < spec.eps[j]; });
  for (std::size_t i : order) {
    const Point& p = pts[i];
    const double x = std::fabs(std::log(spec.eps[i]));
    const double mn = p.tp.mass * spec.n;
    const bool guard = p.tp.fit_ok && mn >= 8.0;
    r.points.add({spec.eps[i], x, p.var.mean, p.var.error, p.mean.mean, p.mean.error, p.tp.mass, p.tp.mass_error,
                  p.tp.fit_ok, mn, guard});
    if (!guard) r.notes.push_back("finite-size guard m n >= 8 fails at eps=" + std::to_string(spec.eps[i]));
    xs.push_back(x);
    ys.push_back(p.var.mean);
  }
  bool var_decreasing = true, mass_increasing = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const Point& lo = pts[order[k - 1]];
    const Point& hi = pts[order[k]];
    var_decreasing = var_decreasing && hi.var.mean <= lo.var.mean + 3.0 * std::hypot(lo.var.error, hi.var.error);
    mass_increasing = mass_increasing && hi.tp.mass >= lo.tp.mass - 3.0 * std::hypot(lo.tp.mass_error, hi.tp.mass_error);
  }
  const LinearFit fit = fit_line(xs, ys);
  r.fits = {{"slope", fit.slope},
            {"slope_error", fit.slope_error},
            {"intercept", fit.intercept},
            {"r2", fit.r2},
            {"reference_slope", 1.0 / std::numbers::pi},
            {"slope_window", {spec.slope_lo, spec.slope_hi}},
            {"variance_decreasing_in_eps", var_decreasing},
            {"mass_increasing_in_eps", mass_increasing}};
  r.pass = fit.slope >= spec.slope_lo && fit.slope <= spec.slope_hi;
  return r;
}

ScalingReport run_truncation_check(const TruncationSpec& spec, WorkerPool* pool) {
  require(!spec.cutoffs.empty(), "truncation check needs cutoffs");
  for (double h : spec.cutoffs) require(h >= 0.0, "cutoffs must be >= 0");
  spec.params.validate();
  std::vector<double> hs = spec.cutoffs;
  std::sort(hs.begin(), hs.end());
  const auto box = make_box(spec.d, spec.n);
  const auto env = sample_environment(spec.law, spec.params, *box, spec.env_seed);

  ScalingReport r;
  r.experiment = "truncation";
  r.params = {{"law", spec.law.name()}, {"a", spec.params.a}, {"b", spec.params.b}, {"h", spec.params.h},
              {"d", spec.d},            {"n", spec.n},         {"cutoffs", hs},      {"t_nodes", spec.thermo.nodes}};
  r.seeds = {spec.env_seed, spec.dyn_seed};
  r.points.columns = {"H", "truncated_sites", "delta", "std_error", "abs_delta"};

  std::vector<FreeEnergyEstimate> est(hs.size());
  std::vector<std::size_t> clipped(hs.size(), 0);
  for_each_job(pool, hs.size(), [&](std::size_t i) {
    std::vector<double> target(env.rewards);
    for (double& w : target) {
      const double c = std::clamp(w, -hs[i], hs[i]);
      clipped[i] += c != w;
      w = c;
    }
    ThermoOptions opt = spec.thermo;
    opt.seed = derive_seed(spec.dyn_seed, kTruncationTag, i);
    est[i] = free_energy_difference(box, env.rewards, target, spec.params.a, opt).estimate;
  });

  bool zero_exact = true, non_increasing = true, beyond_se = true;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    r.points.add({hs[i], clipped[i], est[i].value, est[i].std_error, std::fabs(est[i].value)});
    if (clipped[i] == 0) zero_exact = zero_exact && est[i].value == 0.0;
    if (i > 0) {
      const double drop = std::fabs(est[i - 1].value) - std::fabs(est[i].value);
      const double se = std::hypot(est[i - 1].std_error, est[i].std_error);
      non_increasing = non_increasing && drop >= -3.0 * se;
      if (clipped[i - 1] > 0) beyond_se = beyond_se && drop > se;
    }
  }
  r.fits = {{"zero_when_nothing_clipped", zero_exact},
            {"abs_delta_non_increasing", non_increasing},
            {"decreasing_beyond_se", beyond_se}};
  r.pass = zero_exact && non_increasing;
  return r;
}

}  // namespace gffpin
