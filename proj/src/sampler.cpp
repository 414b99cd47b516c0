#include "gffpin/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/rng.hpp"

namespace gffpin {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

Model::Model(std::shared_ptr<const Box> box, std::vector<double> rewards, double a, double pin_scale)
    : box_(std::move(box)), rewards_(std::move(rewards)), a_(a), t_(pin_scale) {
  if (!box_) throw ConfigError("model needs a box");
  if (!(a_ > 0.0) || !std::isfinite(a_)) throw ConfigError("well half-width a must be > 0");
  if (!(t_ >= 0.0 && t_ <= 1.0)) throw ConfigError("pin scale t must lie in [0, 1]");
  if (rewards_.size() != box_->volume()) throw ConfigError("reward count does not match box volume");
  decay_.resize(rewards_.size());
  for (std::size_t i = 0; i < rewards_.size(); ++i) {
    if (!std::isfinite(rewards_[i])) throw ConfigError("rewards must be finite");
    decay_[i] = std::exp(-std::fabs(t_ * rewards_[i]));
  }
}

Model::Model(std::shared_ptr<const Box> box, const EnvironmentRealization& env, double pin_scale)
    : Model(std::move(box), env.rewards, env.params.a, pin_scale) {}

Model Model::with_direction(std::vector<double> direction) const {
  if (direction.size() != rewards_.size()) throw ConfigError("path direction does not match box volume");
  Model m = *this;
  m.direction_ = std::move(direction);
  return m;
}

double hamiltonian(const FieldState& state, const Box& box) {
  double sum = 0.0;
  const int deg = box.degree();
  for (SiteIndex x = 0; x < box.volume(); ++x) {
    const auto nb = box.neighbors(x);
    const double px = state.phi[x];
    for (int k = 0; k < deg; ++k) {
      const SiteIndex y = nb[k];
      if (y == kBoundary) {
        sum += px * px;
      } else if (k % 2 == 1) {  // interior edge, counted from its lower end
        const double diff = px - state.phi[y];
        sum += diff * diff;
      }
    }
  }
  return sum / (2.0 * deg);
}

namespace {

double neighbor_mean(const double* phi, std::span<const SiteIndex> nb) {
  double sum = 0.0;
  for (SiteIndex y : nb)
    if (y != kBoundary) sum += phi[y];
  return sum / static_cast<double>(nb.size());
}

double pin_probability_from_masses(const WellMasses& m, double w) {
  const double logit = w + m.log_inside - m.log_outside;
  return logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
}

// One exact heat-bath draw. Works with |mean| and reflects, so every probability used is
// a lower-tail or small upper-tail mass and no cancellation happens near 1.
double draw_site(double mean, double a, double w, double decay, CounterStream& rng, double& pin_prob) {
  const double m = std::fabs(mean);
  const double right = normal_sf(a - m);  // Z > a - m
  const double left = normal_sf(a + m);   // Z < -a - m
  const double inside = m < a ? 1.0 - right - left : normal_sf(m - a) - left;
  const double outside = right + left;

  double q;
  if (inside > 1e-300 && outside > 1e-300) {
    q = w >= 0.0 ? inside / (inside + outside * decay) : inside * decay / (inside * decay + outside);
  } else {
    q = pin_probability_from_masses(well_masses(m, a), w);
  }
  pin_prob = q;

  double z;
  if (rng.uniform() < q) {
    if (inside >= kInverseCdfMassFloor) {
      z = std::clamp(normal_quantile(left + rng.uniform() * inside), -a - m, a - m);
    } else {
      z = sample_interval(-a - m, a - m, rng);
    }
  } else if (rng.uniform() * outside < right) {
    z = sample_upper_tail(a - m, right, rng);
  } else {
    z = -sample_upper_tail(a + m, left, rng);
  }
  const double x = m + z;
  return mean < 0.0 ? -x : x;
}

}  // namespace

struct KernelAccess {
  static double update(FieldState& state, const Model& model, SiteIndex site) {
    CounterStream rng(state.seed, StreamDomain::dynamics, state.sweep_count, site);
    const double mean = neighbor_mean(state.phi.data(), model.box().neighbors(site));
    double q;
    state.phi[site] = draw_site(mean, model.a_, model.t_ * model.rewards_[site], model.decay_[site], rng, q);
    return q;
  }

  static double reflect(FieldState& state, const Model& model, SiteIndex site) {
    const double mean = neighbor_mean(state.phi.data(), model.box().neighbors(site));
    const double old = state.phi[site];
    const double proposal = 2.0 * mean - old;
    const double a = model.a_;
    const int change = static_cast<int>(std::fabs(proposal) <= a) - static_cast<int>(std::fabs(old) <= a);
    const double log_ratio = change * model.t_ * model.rewards_[site];
    if (log_ratio >= 0.0) {
      state.phi[site] = proposal;
    } else {
      CounterStream rng(state.seed, StreamDomain::dynamics, state.sweep_count, site);
      if (rng.uniform() < std::exp(log_ratio)) state.phi[site] = proposal;
    }
    return 0.0;
  }
};

ConditionalParams conditional_params(const FieldState& state, const Box& box, SiteIndex site) {
  return {neighbor_mean(state.phi.data(), box.neighbors(site)), 1.0};
}

double pin_probability(double mean, double a, double w_eff) {
  if (!(a > 0.0)) throw ConfigError("pin_probability needs a > 0");
  if (w_eff == INFINITY) return 1.0;
  if (w_eff == -INFINITY) return 0.0;
  return pin_probability_from_masses(well_masses(mean, a), w_eff);
}

double heat_bath_update(FieldState& state, const Model& model, SiteIndex site) {
  return KernelAccess::update(state, model, site);
}

namespace {

constexpr std::size_t kChunk = 1024;

using SiteMove = double (*)(FieldState&, const Model&, SiteIndex);

SweepSummary update_range(FieldState& state, const Model& model, std::span<const SiteIndex> sites, SiteMove move) {
  SweepSummary s;
  const auto direction = model.path_direction();
  for (SiteIndex x : sites) {
    const double q = move(state, model, x);
    s.pin += q;
    s.weighted_pin += direction[x] * q;
  }
  return s;
}

SweepSummary update_class(FieldState& state, const Model& model, std::span<const SiteIndex> sites, WorkerPool* pool,
                          SiteMove move = &KernelAccess::update) {
  const std::size_t chunks = (sites.size() + kChunk - 1) / kChunk;
  std::vector<SweepSummary> partial(chunks);
  auto task = [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    partial[c] = update_range(state, model, sites.subspan(begin, std::min(kChunk, sites.size() - begin)), move);
  };
  if (pool != nullptr && pool->size() > 1 && chunks > 1) {
    pool->run(chunks, task);
  } else {
    for (std::size_t c = 0; c < chunks; ++c) task(c);
  }
  SweepSummary total;
  for (const auto& p : partial) {
    total.pin += p.pin;
    total.weighted_pin += p.weighted_pin;
  }
  return total;
}

}  // namespace

SweepSummary sweep(FieldState& state, const Model& model, SweepOrder order, WorkerPool* pool) {
  const Box& box = model.box();
  if (state.phi.size() != box.volume()) throw ConfigError("field state does not match the model's box");
  SweepSummary total;
  if (order == SweepOrder::sequential) {
    const auto direction = model.path_direction();
    for (SiteIndex x = 0; x < box.volume(); ++x) {
      const double q = KernelAccess::update(state, model, x);
      total.pin += q;
      total.weighted_pin += direction[x] * q;
    }
  } else {
    const SweepSummary even = update_class(state, model, box.sites_of(Parity::even), pool);
    const SweepSummary odd = update_class(state, model, box.sites_of(Parity::odd), pool);
    total = {even.pin + odd.pin, even.weighted_pin + odd.weighted_pin};
  }
  ++state.sweep_count;
  return total;
}

void overrelax_sweep(FieldState& state, const Model& model, WorkerPool* pool) {
  const Box& box = model.box();
  if (state.phi.size() != box.volume()) throw ConfigError("field state does not match the model's box");
  update_class(state, model, box.sites_of(Parity::even), pool, &KernelAccess::reflect);
  update_class(state, model, box.sites_of(Parity::odd), pool, &KernelAccess::reflect);
  ++state.sweep_count;
}

std::vector<SiteIndex> PinnedSet::members() const {
  std::vector<SiteIndex> out;
  out.reserve(cardinality_);
  for (SiteIndex x = 0; x < volume_; ++x)
    if (contains(x)) out.push_back(x);
  return out;
}

PinnedSet pinned_set(const FieldState& state, double a) {
  if (!(a > 0.0)) throw ConfigError("pinned_set needs a > 0");
  PinnedSet set(state.phi.size());
  for (SiteIndex x = 0; x < state.phi.size(); ++x)
    if (std::fabs(state.phi[x]) <= a) set.insert(x);
  return set;
}

std::uint64_t default_burn_in(const Box& box) {
  const auto n = static_cast<std::uint64_t>(box.side());
  return box.dim() >= 3 ? 10 * n : 10 * n * n;
}

namespace {
constexpr char kSnapMagic[8] = {'G', 'F', 'F', 'S', 'N', 'A', 'P', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("snapshot truncated");
  return v;
}
}  // namespace

void write_snapshot(std::ostream& out, const Box& box, const FieldState& state) {
  if (state.phi.size() != box.volume()) throw ConfigError("field state does not match box");
  out.write(kSnapMagic, sizeof kSnapMagic);
  put<std::int32_t>(out, box.dim());
  put<std::int32_t>(out, box.side());
  put<std::uint64_t>(out, state.sweep_count);
  put<std::uint64_t>(out, state.seed);
  out.write(reinterpret_cast<const char*>(state.phi.data()), static_cast<std::streamsize>(state.phi.size() * sizeof(double)));
}

FieldState read_snapshot(std::istream& in, const Box& box) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSnapMagic, sizeof magic) != 0)
    throw ConfigError("not a gffpin snapshot");
  const auto d = get<std::int32_t>(in);
  const auto n = get<std::int32_t>(in);
  if (d != box.dim() || n != box.side()) throw ConfigError("snapshot box does not match");
  FieldState state;
  state.sweep_count = get<std::uint64_t>(in);
  state.seed = get<std::uint64_t>(in);
  state.phi.resize(box.volume());
  if (!in.read(reinterpret_cast<char*>(state.phi.data()), static_cast<std::streamsize>(state.phi.size() * sizeof(double))))
    throw ConfigError("snapshot truncated");
  return state;
}

void save_snapshot(const std::string& path, const Box& box, const FieldState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_snapshot(out, box, state);
}

FieldState load_snapshot(const std::string& path, const Box& box) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return read_snapshot(in, box);
}

}  // namespace gffpin
