#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gffpin/environment.hpp"
#include "gffpin/lattice.hpp"

namespace gffpin {

class WorkerPool;

/// Heights on the box; the boundary is implicit and always 0.
///
/// Dynamics draws are addressed by (seed, sweep_count, site), so a state plus its
/// sweep counter fully determines the rest of the trajectory.
struct FieldState {
  std::vector<double> phi;
  std::uint64_t seed = 0;
  std::uint64_t sweep_count = 0;

  static FieldState zeros(const Box& box, std::uint64_t seed) { return {std::vector<double>(box.volume(), 0.0), seed, 0}; }
};

/// The pinning model on a box with rewards scaled by t in [0, 1]; t = 0 is the free field.
class Model {
 public:
  Model(std::shared_ptr<const Box> box, std::vector<double> rewards, double a, double pin_scale = 1.0);
  Model(std::shared_ptr<const Box> box, const EnvironmentRealization& env, double pin_scale = 1.0);

  const Box& box() const { return *box_; }
  std::shared_ptr<const Box> box_ptr() const { return box_; }
  double well() const { return a_; }
  double pin_scale() const { return t_; }

  /// Unscaled rewards w_x.
  std::span<const double> rewards() const { return rewards_; }
  double effective_reward(SiteIndex x) const { return t_ * rewards_[x]; }

  Model at_scale(double t) const { return Model(box_, rewards_, a_, t); }

  /// Weights v_x for SweepSummary::weighted_pin. Defaults to the unscaled rewards, the
  /// derivative of t * w in t; a path w_0 + s * delta sets it to delta.
  std::span<const double> path_direction() const { return direction_.empty() ? rewards() : direction_; }
  Model with_direction(std::vector<double> direction) const;

 private:
  friend struct KernelAccess;

  std::shared_ptr<const Box> box_;
  std::vector<double> rewards_;
  std::vector<double> direction_;
  std::vector<double> decay_;  // exp(-|t w_x|)
  double a_;
  double t_;
};

enum class SweepOrder { sequential, checkerboard };

/// Sums of the conditional pin probabilities seen during one sweep.
///
/// Each site's probability is evaluated on the configuration just before its update,
/// so at stationarity E[pin] equals the expected number of pinned sites and E[weighted_pin]
/// equals sum_x v_x P(phi_x in [-a, a]) with v = model.path_direction().
struct SweepSummary {
  double pin = 0.0;
  double weighted_pin = 0.0;
};

double hamiltonian(const FieldState& state, const Box& box);

struct ConditionalParams {
  double mean;
  double stddev;
};

/// Law of phi_x given the other heights under the free field: N(neighbor average, 1).
ConditionalParams conditional_params(const FieldState& state, const Box& box, SiteIndex site);

/// Probability that a heat-bath draw around `mean` lands in [-a, a] when that region
/// carries reward w_eff.
double pin_probability(double mean, double a, double w_eff);

/// Draws phi_x from its exact conditional; returns the pin probability that was used.
double heat_bath_update(FieldState& state, const Model& model, SiteIndex site);

/// Updates every site once and advances sweep_count. The checkerboard order updates the
/// even class then the odd class; with a pool each class is split across workers, and the
/// result is bit-identical to the single-threaded run.
SweepSummary sweep(FieldState& state, const Model& model, SweepOrder order, WorkerPool* pool = nullptr);

/// Reflection phi_x -> 2 mean - phi_x at every site (checkerboard order), accepted with the
/// Metropolis probability min(1, exp(w_eff * change in the well indicator)). Leaves the
/// model invariant; interleaved with heat-bath sweeps it shortens autocorrelations of the
/// long-wavelength modes. Advances sweep_count like a heat-bath sweep.
void overrelax_sweep(FieldState& state, const Model& model, WorkerPool* pool = nullptr);

/// Sites whose height lies in [-a, a].
class PinnedSet {
 public:
  PinnedSet() = default;
  PinnedSet(std::size_t volume) : bits_((volume + 63) / 64, 0), volume_(volume) {}

  void insert(SiteIndex x) {
    std::uint64_t& w = bits_[x >> 6];
    const std::uint64_t mask = std::uint64_t{1} << (x & 63);
    cardinality_ += (w & mask) == 0;
    w |= mask;
  }
  bool contains(SiteIndex x) const { return (bits_[x >> 6] >> (x & 63)) & 1u; }
  std::size_t cardinality() const { return cardinality_; }
  std::size_t volume() const { return volume_; }
  std::vector<SiteIndex> members() const;

 private:
  std::vector<std::uint64_t> bits_;
  std::size_t volume_ = 0;
  std::size_t cardinality_ = 0;
};

PinnedSet pinned_set(const FieldState& state, double a);

/// Default burn-in: 10 n^2 sweeps for d <= 2, 10 n sweeps for d >= 3.
std::uint64_t default_burn_in(const Box& box);

/// Binary snapshot: magic "GFFSNAP1", int32 d, int32 n, uint64 sweep_count, uint64 seed,
/// then n^d little-endian doubles in site order.
void write_snapshot(std::ostream& out, const Box& box, const FieldState& state);
FieldState read_snapshot(std::istream& in, const Box& box);
void save_snapshot(const std::string& path, const Box& box, const FieldState& state);
FieldState load_snapshot(const std::string& path, const Box& box);

}  // namespace gffpin
