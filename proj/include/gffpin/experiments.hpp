#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gffpin/environment.hpp"
#include "gffpin/estimators.hpp"

namespace gffpin {

class WorkerPool;

enum class GapRegime { d3plus, d2 };

/// Inputs of the quenched-annealed gap bound. C1 is an existence-only constant, so it is
/// an input here (default 1).
struct GapBoundSpec {
  DisorderLaw law = DisorderLaw::bernoulli();
  PinningParams params;
  GapRegime regime = GapRegime::d3plus;
  double c1 = 1.0;
};

/// lambda = C1 l / (1 + C1 l) for d >= 3 and C1 l / sqrt|log l| for d = 2.
double gap_lambda(const GapBoundSpec& spec);

/// E log(lambda gamma_0 + 1 - lambda) over the law of gamma_0 = exp(b e_0 + h - l).
/// Closed form for two-point and constant laws, adaptive Gauss-Kronrod on the real line
/// (absolute tolerance 1e-8) for the Gaussian law. Rejects lambda outside (0, 1].
double gap_expectation(const DisorderLaw& law, const PinningParams& params, double lambda);

/// The bound itself: gap_expectation at lambda (d >= 3) or at lambda / |log lambda| (d = 2).
double evaluate_gap_bound(const GapBoundSpec& spec);

/// Rows of scalar cells (numbers, strings, booleans) with named columns.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;

  void add(std::vector<nlohmann::json> row);
  /// Column values as doubles; throws ConfigError on an unknown column.
  std::vector<double> column(const std::string& name) const;
};

/// Raw points plus the verdict record of one experiment.
struct ExperimentReport {
  std::string experiment;
  nlohmann::json params = nlohmann::json::object();
  ReportTable points;
  nlohmann::json fits = nlohmann::json::object();
  bool pass = false;
  std::vector<std::string> notes;
  std::vector<std::uint64_t> seeds;

  /// {experiment, params, fits, pass, seeds, notes}
  nlohmann::json verdict() const;
};

using ScalingReport = ExperimentReport;
using DominationReport = ExperimentReport;

/// CSV with a header row; numbers are written with 17 significant digits.
void write_csv(std::ostream& out, const ReportTable& table);

/// Budget for chains that measure observables rather than free energies.
struct ChainOptions {
  std::optional<std::uint64_t> burn_in;  // default_burn_in(box) when empty
  std::uint64_t sweeps = 20000;
  int overrelax = 0;
  std::size_t blocks = 32;
};

struct GapExperimentSpec {
  DisorderLaw law = DisorderLaw::bernoulli();
  PinningParams params{1.0, 1.0, 0.2};
  int d = 2;
  std::vector<int> sizes{8, 16, 32};
  int replicates = 20;
  std::uint64_t env_seed = 1;
  std::uint64_t dyn_seed = 1;
  double c1 = 1.0;
  ThermoOptions thermo;
};

/// Mean quenched free energy over disorder replicates against the annealed one, per box
/// size, together with the analytic bound.
ScalingReport run_gap_experiment(const GapExperimentSpec& spec, WorkerPool* pool = nullptr);

struct AnnealedScalingSpec {
  int d = 3;
  int n = 12;
  double a = 1.0;
  std::vector<double> ells{0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2};
  std::uint64_t seed = 1;
  double min_r2 = 0.98;
  ThermoOptions thermo;
};

/// Homogeneous free energy against l (d >= 3) or l / sqrt|log l| (d = 2), fitted through
/// the origin over the points whose SE is below 20% of the signal, plus a monotonicity check.
ScalingReport run_annealed_scaling(const AnnealedScalingSpec& spec, WorkerPool* pool = nullptr);

struct DominationSpec {
  int d = 3;
  int n = 8;
  double a = 1.0;
  std::vector<double> eps{0.0, 0.02, 0.05, 0.1, 0.2};
  std::uint64_t seed = 1;
  double max_spread = 4.0;
  ChainOptions chain;
};

/// Void probabilities of the pinned-site set under the homogeneous model with reward
/// log(1 + eps), per test set (singleton, distant pair, central block); fits the per-site
/// void rate and compares it with g(eps).
DominationReport run_domination_test(const DominationSpec& spec, WorkerPool* pool = nullptr);

struct BoxDoublingSpec {
  DisorderLaw law = DisorderLaw::bernoulli();
  PinningParams params{1.0, 1.0, 0.3};
  int d = 2;
  std::vector<int> sizes{4, 8, 16};
  int replicates = 30;
  std::uint64_t env_seed = 1;
  std::uint64_t dyn_seed = 1;
  ThermoOptions thermo;
};

/// Across-replicate variance of the quenched free energy and the defect against the
/// average over the 2^d half-size sub-boxes carrying the restricted environment.
ScalingReport run_box_doubling(const BoxDoublingSpec& spec, WorkerPool* pool = nullptr);

struct TailSpec {
  int d = 2;
  std::vector<int> sizes{16, 32, 64};
  double a = 1.0;
  double eps = 0.1;
  std::vector<double> thresholds{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
  std::uint64_t seed = 1;
  ChainOptions chain{std::nullopt, 20000, 2, 32};
};

/// Exceedance curves P(|phi_center| > T) for the free and the pinned field, with an
/// envelope C1 exp(-C2 T^2 / log n) fitted to each.
ScalingReport run_tail_check(const TailSpec& spec, WorkerPool* pool = nullptr);

struct VarianceD2Spec {
  int n = 64;
  double a = 1.0;
  std::vector<double> eps{0.01, 0.02, 0.05, 0.1, 0.2};
  std::uint64_t seed = 1;
  double slope_lo = 0.2;
  double slope_hi = 0.45;
  ChainOptions chain{std::nullopt, 40000, 2, 32};
};

/// Variance at the center of a d = 2 box against |log eps| with the decay rate of the
/// axis two-point function; the finite-size guard m n >= 8 is reported per point.
ScalingReport run_variance_d2(const VarianceD2Spec& spec, WorkerPool* pool = nullptr);

struct TruncationSpec {
  DisorderLaw law = DisorderLaw::gaussian();
  PinningParams params{1.0, 1.0, 0.0};
  int d = 2;
  int n = 8;
  std::vector<double> cutoffs{1.0, 2.0, 3.0};
  std::uint64_t env_seed = 1;
  std::uint64_t dyn_seed = 1;
  ThermoOptions thermo;
};

/// f(e^H) - f(e) for rewards clipped to [-H, H], integrated along the straight path between
/// the two reward fields (so only clipped sites contribute, and the difference is exactly 0
/// when nothing is clipped).
ScalingReport run_truncation_check(const TruncationSpec& spec, WorkerPool* pool = nullptr);

/// The 2^d sites nearest the geometric center of the box (a single site for odd n).
std::vector<SiteIndex> central_sites(const Box& box);

}  // namespace gffpin
