#include "gffpin/estimators.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <memory>

#include "gffpin/error.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/rng.hpp"

namespace gffpin {

namespace {
constexpr std::uint64_t kThermoNodeTag = 0x7468'6572'6d6fULL;  // "thermo"
constexpr std::size_t kDriftBlocks = 16;
}  // namespace

std::string to_string(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::thermo_integration: return "thermo_integration";
    case EstimatorMethod::importance: return "importance";
    case EstimatorMethod::oracle_expansion: return "oracle_expansion";
  }
  return "?";
}

EstimatorMethod parse_estimator_method(const std::string& name) {
  if (name == "thermo_integration" || name == "thermo") return EstimatorMethod::thermo_integration;
  if (name == "importance") return EstimatorMethod::importance;
  if (name == "oracle_expansion" || name == "expansion" || name == "oracle") return EstimatorMethod::oracle_expansion;
  throw ConfigError("unknown estimator method '" + name + "' (expected thermo, importance, expansion)");
}

namespace {

double indicator_integrand(const FieldState& state, const Model& model) {
  const auto w = model.path_direction();
  const double a = model.well();
  double sum = 0.0;
  for (std::size_t x = 0; x < w.size(); ++x)
    if (std::fabs(state.phi[x]) <= a) sum += w[x];
  return sum;
}

double drift_z(std::span<const double> series) {
  const std::size_t half = series.size() / 2;
  if (half < kDriftBlocks) return 0.0;
  const MeanError first = batch_means(series.first(half), kDriftBlocks);
  const MeanError second = batch_means(series.subspan(series.size() - half), kDriftBlocks);
  const double diff = first.mean - second.mean;
  const double scale = std::hypot(first.error, second.error);
  const double floor = 1e-13 * (1.0 + std::fabs(first.mean) + std::fabs(second.mean));
  return diff / std::max(scale, floor);
}

void advance(FieldState& state, const Model& model, const ThermoOptions& opt) {
  for (int k = 0; k < opt.overrelax; ++k) overrelax_sweep(state, model);
}

// `at_t` is the model at the node; its path direction is the integrand weight.
ThermoNode run_node(const Model& at_t, double t, double weight, std::uint64_t seed, const ThermoOptions& opt) {
  ThermoNode node;
  node.t = t;
  node.weight = weight;
  FieldState state = FieldState::zeros(at_t.box(), seed);
  const std::uint64_t burn = opt.burn_in.value_or(default_burn_in(at_t.box()));
  for (std::uint64_t s = 0; s < burn; ++s) {
    advance(state, at_t, opt);
    sweep(state, at_t, opt.order);
  }

  std::vector<double> series;
  series.reserve(opt.sweeps);
  auto measure = [&](std::uint64_t count) {
    for (std::uint64_t s = 0; s < count; ++s) {
      advance(state, at_t, opt);
      const SweepSummary summary = sweep(state, at_t, opt.order);
      series.push_back(opt.rao_blackwell ? summary.weighted_pin : indicator_integrand(state, at_t));
    }
  };
  measure(opt.sweeps);
  // Pilot autocorrelation sets the final length: every batch should span ~8 tau.
  const double pilot_tau = integrated_autocorrelation_time(series);
  const auto wanted = static_cast<std::uint64_t>(std::ceil(static_cast<double>(opt.blocks) * 8.0 * pilot_tau));
  const std::uint64_t target = std::clamp<std::uint64_t>(wanted, opt.sweeps, std::max(opt.sweeps, opt.max_sweeps));
  if (target > series.size()) measure(target - series.size());

  node.tau = integrated_autocorrelation_time(series);
  node.sweeps = series.size();
  node.integrand = batch_means(series, opt.blocks);
  node.drift_z = drift_z(series);
  if (std::fabs(node.drift_z) > opt.drift_z_limit)
    throw NumericalError("thermodynamic integration node t=" + std::to_string(t) +
                         " failed the stationarity check (drift z=" + std::to_string(node.drift_z) + ")");
  if (opt.keep_series) node.series = std::move(series);
  return node;
}

}  // namespace

namespace {

ThermoResult integrate_nodes(const std::function<Model(double)>& node_model, const Box& box,
                             const ThermoOptions& options, WorkerPool* pool) {
  if (options.nodes < 1) throw ConfigError("thermodynamic integration needs at least one node");
  if (options.blocks < kMinBlocks) throw ConfigError("thermodynamic integration needs at least 8 blocks");
  if (options.sweeps < options.blocks) throw ConfigError("measurement sweeps must be at least the block count");
  if (options.overrelax < 0) throw ConfigError("over-relaxation count must be >= 0");

  ThermoResult result;
  FreeEnergyEstimate& est = result.estimate;
  est.method = EstimatorMethod::thermo_integration;
  est.diagnostics.quadrature_nodes = options.nodes;
  const Quadrature quad = gauss_legendre(options.nodes, 0.0, 1.0);
  result.nodes.resize(options.nodes);
  auto job = [&](std::size_t i) {
    result.nodes[i] = run_node(node_model(quad.nodes[i]), quad.nodes[i], quad.weights[i],
                               derive_seed(options.seed, kThermoNodeTag, i), options);
  };
  if (pool != nullptr) {
    pool->run(result.nodes.size(), job);
  } else {
    for (std::size_t i = 0; i < result.nodes.size(); ++i) job(i);
  }

  double value = 0.0, var = 0.0;
  for (const auto& node : result.nodes) {
    value += node.weight * node.integrand.mean;
    var += node.weight * node.weight * node.integrand.error * node.integrand.error;
    est.diagnostics.sweeps += node.sweeps;
    est.diagnostics.max_tau = std::max(est.diagnostics.max_tau, node.tau);
    est.diagnostics.max_drift_z = std::max(est.diagnostics.max_drift_z, std::fabs(node.drift_z));
  }
  const double volume = static_cast<double>(box.volume());
  est.value = value / volume;
  est.std_error = std::max(std::sqrt(var) / volume, kErrorFloor);
  return result;
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

ThermoResult free_energy_thermo(const Model& model, const ThermoOptions& options, WorkerPool* pool) {
  if (all_zero(model.rewards())) {
    ThermoResult result;
    result.estimate.diagnostics.quadrature_nodes = options.nodes;
    return result;
  }
  return integrate_nodes([&](double t) { return model.at_scale(t); }, model.box(), options, pool);
}

ThermoResult free_energy_difference(std::shared_ptr<const Box> box, std::span<const double> base,
                                    std::span<const double> target, double a, const ThermoOptions& options,
                                    WorkerPool* pool) {
  if (base.size() != box->volume() || target.size() != box->volume())
    throw ConfigError("reward count does not match box volume");
  std::vector<double> delta(base.size());
  for (std::size_t x = 0; x < delta.size(); ++x) delta[x] = target[x] - base[x];
  if (all_zero(delta)) {
    ThermoResult result;
    result.estimate.diagnostics.quadrature_nodes = options.nodes;
    return result;
  }
  auto node_model = [&](double s) {
    std::vector<double> w(base.size());
    for (std::size_t x = 0; x < w.size(); ++x) w[x] = base[x] + s * delta[x];
    return Model(box, std::move(w), a).with_direction(delta);
  };
  return integrate_nodes(std::function<Model(double)>(node_model), *box, options, pool);
}

FreeEnergyEstimate free_energy_importance(const Model& model, const ImportanceOptions& options, WorkerPool* pool) {
  if (options.blocks < kMinBlocks) throw ConfigError("importance sampling needs at least 8 jackknife blocks");
  if (options.samples < options.blocks) throw ConfigError("importance sampling needs at least one draw per block");
  const Box& box = model.box();
  const std::size_t volume = box.volume();
  if (volume > kDenseGreenLimit) throw ConfigError("importance sampling is limited to boxes of at most 4096 sites");

  FreeEnergyEstimate est;
  est.method = EstimatorMethod::importance;
  est.diagnostics.samples = options.samples;
  const auto rewards = model.rewards();
  const double t = model.pin_scale();
  const double a = model.well();
  if (std::all_of(rewards.begin(), rewards.end(), [&](double w) { return t * w == 0.0; })) {
    est.diagnostics.effective_sample_size = static_cast<double>(options.samples);
    return est;
  }

  const ExactFreeFieldSampler sampler(box);
  const std::size_t blocks = options.blocks;
  struct BlockSums {
    double shift = -INFINITY;
    double sum = 0.0;
    double sum_sq = 0.0;
    double count = 0.0;
  };
  std::vector<BlockSums> block(blocks);
  auto job = [&](std::size_t b) {
    const std::uint64_t begin = options.samples * b / blocks;
    const std::uint64_t end = options.samples * (b + 1) / blocks;
    std::vector<double> phi(volume);
    std::vector<double> logw;
    logw.reserve(end - begin);
    for (std::uint64_t i = begin; i < end; ++i) {
      sampler.draw(options.seed, i, phi);
      double lw = 0.0;
      for (std::size_t x = 0; x < volume; ++x)
        if (std::fabs(phi[x]) <= a) lw += t * rewards[x];
      logw.push_back(lw);
    }
    BlockSums& s = block[b];
    s.shift = *std::max_element(logw.begin(), logw.end());
    for (double lw : logw) {
      const double v = std::exp(lw - s.shift);
      s.sum += v;
      s.sum_sq += v * v;
    }
    s.count = static_cast<double>(logw.size());
  };
  if (pool != nullptr) {
    pool->run(blocks, job);
  } else {
    for (std::size_t b = 0; b < blocks; ++b) job(b);
  }

  double shift = -INFINITY;
  for (const auto& s : block) shift = std::max(shift, s.shift);
  std::vector<double> sums(blocks), counts(blocks);
  double total = 0.0, total_sq = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const double scale = std::exp(block[b].shift - shift);
    sums[b] = block[b].sum * scale;
    counts[b] = block[b].count;
    total += sums[b];
    total_sq += block[b].sum_sq * scale * scale;
  }
  const double ess = total * total / total_sq;
  est.diagnostics.effective_sample_size = ess;
  if (ess < static_cast<double>(kMinBlocks) || (volume > options.max_sites && ess < options.min_ess))
    throw StatisticsGuardError("importance weights are degenerate (effective sample size " + std::to_string(ess) + ")");

  const MeanError log_mean = jackknife_log_mean(sums, counts);
  est.value = (log_mean.mean + shift) / static_cast<double>(volume);
  est.std_error = std::max(log_mean.error / static_cast<double>(volume), kErrorFloor);
  return est;
}

FreeEnergyEstimate annealed_free_energy(const Box& box, const AnnealedRequest& request, WorkerPool* pool) {
  request.params.validate();
  const double ell = annealed_strength(request.law, request.params).ell;
  auto shared = std::make_shared<const Box>(box);
  std::vector<double> rewards(box.volume(), ell);
  switch (request.method) {
    case EstimatorMethod::thermo_integration:
      return free_energy_thermo(Model(shared, rewards, request.params.a), request.thermo, pool).estimate;
    case EstimatorMethod::importance:
      return free_energy_importance(Model(shared, rewards, request.params.a), request.importance, pool);
    case EstimatorMethod::oracle_expansion:
      return free_energy_expansion(box, rewards, request.params.a);
  }
  throw ConfigError("unknown estimator");
}

ObservableSeries summarize_series(std::vector<double> values, std::size_t blocks) {
  ObservableSeries out;
  out.estimate = batch_means(values, blocks);
  out.tau = integrated_autocorrelation_time(values);
  out.blocks = blocks;
  out.values = std::move(values);
  return out;
}

ObservableSeries pinned_density(std::span<const PinnedSet> sets, std::size_t blocks) {
  std::vector<double> values;
  values.reserve(sets.size());
  for (const auto& s : sets) values.push_back(static_cast<double>(s.cardinality()) / static_cast<double>(s.volume()));
  return summarize_series(std::move(values), blocks);
}

TwoPointAccumulator::TwoPointAccumulator(const Box& box, SiteIndex origin, int axis, std::vector<int> separations)
    : origin_(origin), axis_(axis), separations_(std::move(separations)) {
  if (axis < 0 || axis >= box.dim()) throw ConfigError("two-point axis out of range");
  auto x = box.decode(origin);
  for (int k : separations_) {
    auto y = x;
    y[axis] += k;
    if (k < 0 || y[axis] >= box.side()) throw ConfigError("two-point separation leaves the box");
    partners_.push_back(box.encode(y));
  }
  partner_values_.resize(partners_.size());
}

void TwoPointAccumulator::add(const FieldState& state) {
  origin_values_.push_back(state.phi[origin_]);
  for (std::size_t j = 0; j < partners_.size(); ++j) partner_values_[j].push_back(state.phi[partners_[j]]);
}

TwoPointEstimate TwoPointAccumulator::finish(std::size_t blocks) const {
  TwoPointEstimate est;
  est.origin = origin_;
  est.axis = axis_;
  est.separations = separations_;
  const double mo = sample_mean(origin_values_);
  std::vector<double> prod(origin_values_.size());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = (origin_values_[i] - mo) * (origin_values_[i] - mo);
  est.variance = batch_means(prod, blocks);
  for (std::size_t j = 0; j < partners_.size(); ++j) {
    const auto& pv = partner_values_[j];
    const double mp = sample_mean(pv);
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = (origin_values_[i] - mo) * (pv[i] - mp);
    est.correlation.push_back(batch_means(prod, blocks));
  }
  fit_mass(est);
  return est;
}

TwoPointEstimate variance_and_twopoint(const Box& box, std::span<const FieldState> samples, SiteIndex origin,
                                       int axis, std::vector<int> separations, std::size_t blocks) {
  TwoPointAccumulator acc(box, origin, axis, std::move(separations));
  for (const auto& s : samples) acc.add(s);
  return acc.finish(blocks);
}

void fit_mass(TwoPointEstimate& est) {
  est.fit_ok = false;
  std::vector<double> ks, logs;
  for (std::size_t j = 0; j < est.separations.size(); ++j) {
    const int k = est.separations[j];
    if (k < 1) continue;
    const MeanError& c = est.correlation[j];
    if (!(c.mean > 0.0 && c.mean > 3.0 * c.error)) break;
    if (ks.empty()) est.window_lo = k;
    est.window_hi = k;
    ks.push_back(k);
    logs.push_back(std::log(c.mean));
  }
  if (ks.size() < 2) return;
  const LinearFit fit = fit_line(ks, logs);
  est.mass = -fit.slope;
  est.mass_error = fit.slope_error;
  est.fit_ok = est.mass >= 0.0;
}

}  // namespace gffpin
