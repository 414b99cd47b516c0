#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gffpin/estimators.hpp"
#include "gffpin/lattice.hpp"
#include "gffpin/sampler.hpp"

namespace gffpin {

/// Dense free-field precision Q = I - A / (2d) over the interior sites (A the interior
/// adjacency). The free field has density proportional to exp(-phi^T Q phi / 2).
Eigen::MatrixXd precision_matrix(const Box& box);

/// Q v computed from the neighbor table, no matrix stored.
void apply_precision(const Box& box, std::span<const double> v, std::span<double> out);

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradients for Q x = rhs; throws NumericalError when the relative residual
/// does not reach `tol` within max_iterations.
CgResult solve_precision(const Box& box, std::span<const double> rhs, double tol = 1e-10, int max_iterations = 0);

/// Column x of the covariance Q^{-1} (the lattice Green function).
std::vector<double> green_column(const Box& box, SiteIndex x);

/// The free-field covariance Sigma = Q^{-1}, dense. Limited to |Lambda| <= 4096.
class GreenFunction {
 public:
  explicit GreenFunction(const Box& box);

  double operator()(SiteIndex x, SiteIndex y) const { return sigma_(x, y); }
  const Eigen::MatrixXd& matrix() const { return sigma_; }
  std::size_t volume() const { return static_cast<std::size_t>(sigma_.rows()); }

 private:
  Eigen::MatrixXd sigma_;
};

inline constexpr std::size_t kDenseGreenLimit = 4096;

/// Exact free-field draws from the Cholesky factor of Q.
class ExactFreeFieldSampler {
 public:
  explicit ExactFreeFieldSampler(const Box& box);

  /// Draw number `index` of stream `seed`; the same (seed, index) always gives the same field.
  void draw(std::uint64_t seed, std::uint64_t index, std::span<double> phi) const;
  std::size_t volume() const { return static_cast<std::size_t>(upper_.rows()); }

 private:
  Eigen::MatrixXd upper_;  // L^T with Q = L L^T
};

std::vector<FieldState> sample_free_field_exact(const Box& box, std::uint64_t seed, std::size_t count);

struct RectangleProbability {
  double value = 0.0;
  double error = 0.0;
};

inline constexpr std::size_t kMaxRectangleDim = 12;

/// P(|phi_x| <= a for every x in subset) under N(0, covariance restricted to subset).
///
/// Sequential conditioning on the Cholesky factor of the sub-covariance. Up to four sites the
/// nested one-dimensional integrals use tensor Gauss-Legendre with 64 points per level (error
/// estimated against 32 points); from five sites on the same separated integrand is averaged
/// over randomly shifted rank-1 lattice points until the error estimate is below 3e-7 or the
/// point budget (2^17 per shift) runs out; the returned error is the estimate either way.
RectangleProbability rectangle_probability(const Eigen::MatrixXd& covariance, std::span<const SiteIndex> subset,
                                           double a);

/// Most sites with a nonzero reward the expansion accepts; the sum has 2^k terms.
inline constexpr std::size_t kMaxExpansionSites = 12;

/// log(sum over subsets A of prod_{x in A}(e^{w_x} - 1) * P_free(|phi_x| <= a on A)) / |Lambda|.
/// std_error is the propagated rectangle-probability error.
FreeEnergyEstimate free_energy_expansion(const Box& box, std::span<const double> rewards, double a);

/// Provenance record for a frozen oracle value.
struct OracleFixture {
  int d = 2;
  int n = 2;
  double a = 1.0;
  std::string law = "bernoulli";
  double b = 0.0;
  double h = 0.0;
  std::uint64_t env_seed = 0;
  double f_exact = 0.0;
  double tol = 0.0;
  std::string generator_version;
};

std::string oracle_generator_version();
void to_json(nlohmann::json& j, const OracleFixture& f);
void from_json(const nlohmann::json& j, OracleFixture& f);
std::vector<OracleFixture> load_fixtures(const std::string& path);

}  // namespace gffpin
