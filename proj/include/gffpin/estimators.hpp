#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gffpin/environment.hpp"
#include "gffpin/sampler.hpp"
#include "gffpin/stats.hpp"

namespace gffpin {

class WorkerPool;

enum class EstimatorMethod { thermo_integration, importance, oracle_expansion };

std::string to_string(EstimatorMethod method);
EstimatorMethod parse_estimator_method(const std::string& name);

struct EstimateDiagnostics {
  int quadrature_nodes = 0;
  std::uint64_t sweeps = 0;           // total measurement sweeps over all nodes
  std::uint64_t samples = 0;          // importance draws or expansion subsets
  double effective_sample_size = 0.0;
  double max_tau = 0.0;               // largest per-node integrated autocorrelation time
  double max_drift_z = 0.0;           // largest first-half vs second-half z score
};

/// Free energy per site relative to the free field, log(Z^w / Z^0) / |Lambda|.
struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  EstimatorMethod method = EstimatorMethod::thermo_integration;
  EstimateDiagnostics diagnostics;
};

/// Error bars are never reported below this; it stands for double rounding in the sums.
inline constexpr double kErrorFloor = 1e-12;

struct ThermoOptions {
  int nodes = 16;
  std::optional<std::uint64_t> burn_in;  // default_burn_in(box) when empty
  std::uint64_t sweeps = 4000;           // measurement sweeps per node (pilot length)
  std::uint64_t max_sweeps = 64000;      // cap after the autocorrelation-driven extension
  std::size_t blocks = 32;
  std::uint64_t seed = 1;
  SweepOrder order = SweepOrder::checkerboard;
  /// Measure the conditional pin probability instead of the raw indicator.
  bool rao_blackwell = true;
  /// Over-relaxation sweeps before every heat-bath sweep.
  int overrelax = 0;
  /// Per-node stationarity guard: |first half - second half| / SE above this throws.
  double drift_z_limit = 6.0;
  bool keep_series = false;
};

struct ThermoNode {
  double t = 0.0;
  double weight = 0.0;
  MeanError integrand;  // sum_x w_x <1{pin_x}>_t
  double tau = 0.5;
  std::uint64_t sweeps = 0;
  double drift_z = 0.0;
  std::vector<double> series;  // filled when keep_series
};

struct ThermoResult {
  FreeEnergyEstimate estimate;
  std::vector<ThermoNode> nodes;
};

/// Thermodynamic integration of d/dt log Z_t = sum_x w_x <1{phi_x in [-a,a]}>_t over
/// Gauss-Legendre nodes in t; each node is an independent chain whose seed is derived from
/// options.seed and the node index, so identical options give identical numbers for any
/// pool size.
ThermoResult free_energy_thermo(const Model& model, const ThermoOptions& options = {}, WorkerPool* pool = nullptr);

/// log(Z^target / Z^base) / |Lambda| along the straight reward path base + s (target - base),
/// integrated the same way. Exactly 0 when the two reward fields coincide.
ThermoResult free_energy_difference(std::shared_ptr<const Box> box, std::span<const double> base,
                                    std::span<const double> target, double a, const ThermoOptions& options = {},
                                    WorkerPool* pool = nullptr);

struct ImportanceOptions {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t blocks = 64;
  std::size_t max_sites = 64;  // above this the run is only accepted when ESS >= min_ess
  double min_ess = 100.0;
};

/// log E_free[exp(sum_x w_x 1{phi_x in [-a, a]})] / |Lambda| over exact free-field draws,
/// with a blocked jackknife error for the log.
FreeEnergyEstimate free_energy_importance(const Model& model, const ImportanceOptions& options = {},
                                          WorkerPool* pool = nullptr);

/// Annealed free energy: the homogeneous model with every reward equal to ell.
struct AnnealedRequest {
  DisorderLaw law = DisorderLaw::bernoulli();
  PinningParams params;
  EstimatorMethod method = EstimatorMethod::thermo_integration;
  ThermoOptions thermo;
  ImportanceOptions importance;
};
FreeEnergyEstimate annealed_free_energy(const Box& box, const AnnealedRequest& request, WorkerPool* pool = nullptr);

/// Per-sweep scalar measurements with an autocorrelation-aware error.
struct ObservableSeries {
  std::vector<double> values;
  MeanError estimate;
  double tau = 0.5;
  std::size_t blocks = 0;
};

ObservableSeries summarize_series(std::vector<double> values, std::size_t blocks = 32);

/// |A| / |Lambda| per sample.
ObservableSeries pinned_density(std::span<const PinnedSet> sets, std::size_t blocks = 32);

struct TwoPointEstimate {
  SiteIndex origin = 0;
  int axis = 0;
  MeanError variance;
  std::vector<int> separations;
  std::vector<MeanError> correlation;  // connected <phi_o phi_{o + k u}>
  bool fit_ok = false;
  double mass = 0.0;
  double mass_error = 0.0;
  int window_lo = 0;
  int window_hi = 0;
};

/// Streams field samples and accumulates the variance at `origin` and connected
/// correlations along +axis; batch-means errors come from the stored per-sample products.
class TwoPointAccumulator {
 public:
  TwoPointAccumulator(const Box& box, SiteIndex origin, int axis, std::vector<int> separations);
  void add(const FieldState& state);
  std::size_t samples() const { return origin_values_.size(); }
  TwoPointEstimate finish(std::size_t blocks = 32) const;

 private:
  SiteIndex origin_;
  int axis_;
  std::vector<int> separations_;
  std::vector<SiteIndex> partners_;
  std::vector<double> origin_values_;
  std::vector<std::vector<double>> partner_values_;
};

TwoPointEstimate variance_and_twopoint(const Box& box, std::span<const FieldState> samples, SiteIndex origin,
                                       int axis, std::vector<int> separations, std::size_t blocks = 32);

/// Exponential decay rate from a log-linear fit of correlation(k) over the longest prefix
/// of separations where the signal exceeds 3 standard errors. Sets fit_ok = false when fewer
/// than two points qualify.
void fit_mass(TwoPointEstimate& estimate);

}  // namespace gffpin
