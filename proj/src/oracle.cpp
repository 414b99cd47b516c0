#include "gffpin/oracle.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/rng.hpp"
#include "gffpin/stats.hpp"

namespace gffpin {

Eigen::MatrixXd precision_matrix(const Box& box) {
  const auto v = static_cast<Eigen::Index>(box.volume());
  if (box.volume() > kDenseGreenLimit) throw ConfigError("dense precision matrix is limited to 4096 sites");
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(v, v);
  const double off = -1.0 / box.degree();
  for (SiteIndex x = 0; x < box.volume(); ++x)
    for (SiteIndex y : box.neighbors(x))
      if (y != kBoundary) q(x, y) = off;
  return q;
}

void apply_precision(const Box& box, std::span<const double> v, std::span<double> out) {
  const double inv = 1.0 / box.degree();
  for (SiteIndex x = 0; x < box.volume(); ++x) {
    double sum = 0.0;
    for (SiteIndex y : box.neighbors(x))
      if (y != kBoundary) sum += v[y];
    out[x] = v[x] - inv * sum;
  }
}

CgResult solve_precision(const Box& box, std::span<const double> rhs, double tol, int max_iterations) {
  const std::size_t n = box.volume();
  if (rhs.size() != n) throw ConfigError("right-hand side does not match box volume");
  if (max_iterations <= 0) max_iterations = static_cast<int>(10 * n + 100);
  CgResult res;
  res.x.assign(n, 0.0);
  std::vector<double> r(rhs.begin(), rhs.end()), p = r, qp(n);
  auto dot = [](std::span<const double> u, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * w[i];
    return s;
  };
  const double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0.0) return res;
  double rr = dot(r, r);
  for (int it = 1; it <= max_iterations; ++it) {
    apply_precision(box, p, qp);
    const double alpha = rr / dot(p, qp);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * qp[i];
    }
    const double rr_new = dot(r, r);
    res.iterations = it;
    res.relative_residual = std::sqrt(rr_new) / bnorm;
    if (res.relative_residual <= tol) {
      // Confirm against the true residual, not the recurrence.
      apply_precision(box, res.x, qp);
      double true_rr = 0.0;
      for (std::size_t i = 0; i < n; ++i) true_rr += (rhs[i] - qp[i]) * (rhs[i] - qp[i]);
      res.relative_residual = std::sqrt(true_rr) / bnorm;
      if (res.relative_residual <= tol) return res;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  throw NumericalError("conjugate gradients did not reach relative residual " + std::to_string(tol) + " (got " +
                       std::to_string(res.relative_residual) + ")");
}

std::vector<double> green_column(const Box& box, SiteIndex x) {
  std::vector<double> e(box.volume(), 0.0);
  e.at(x) = 1.0;
  return solve_precision(box, e).x;
}

GreenFunction::GreenFunction(const Box& box) {
  if (box.volume() > kDenseGreenLimit) throw ConfigError("dense Green function is limited to 4096 sites");
  const Eigen::MatrixXd q = precision_matrix(box);
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
  sigma_ = llt.solve(Eigen::MatrixXd::Identity(q.rows(), q.cols()));
}

ExactFreeFieldSampler::ExactFreeFieldSampler(const Box& box) {
  const Eigen::MatrixXd q = precision_matrix(box);
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
  upper_ = llt.matrixU();
}

void ExactFreeFieldSampler::draw(std::uint64_t seed, std::uint64_t index, std::span<double> phi) const {
  const auto n = upper_.rows();
  CounterStream rng(seed, StreamDomain::free_field, index, 0);
  Eigen::Map<Eigen::VectorXd> out(phi.data(), n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal_quantile(rng.uniform());
  upper_.triangularView<Eigen::Upper>().solveInPlace(out);
}

std::vector<FieldState> sample_free_field_exact(const Box& box, std::uint64_t seed, std::size_t count) {
  const ExactFreeFieldSampler sampler(box);
  std::vector<FieldState> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = FieldState::zeros(box, seed);
    sampler.draw(seed, i, out[i].phi);
  }
  return out;
}

namespace {

// P(lo <= Z <= hi) without cancellation in either tail.
double normal_interval(double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (lo >= 0.0) return normal_sf(lo) - normal_sf(hi);
  if (hi <= 0.0) return normal_cdf(hi) - normal_cdf(lo);
  return 1.0 - normal_cdf(lo) - normal_sf(hi);
}

struct TensorRule {
  const Eigen::MatrixXd& chol;
  double a;
  Quadrature ref;

  double level(int i, const std::array<double, kMaxRectangleDim>& shift) const {
    const int k = static_cast<int>(chol.rows());
    const double lii = chol(i, i);
    const double lo = (-a - shift[i]) / lii;
    const double hi = (a - shift[i]) / lii;
    if (i == k - 1) return normal_interval(lo, hi);
    if (hi <= lo) return 0.0;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double sum = 0.0;
    std::array<double, kMaxRectangleDim> next = shift;
    for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
      const double z = mid + half * ref.nodes[q];
      for (int j = i + 1; j < k; ++j) next[j] = shift[j] + chol(j, i) * z;
      sum += ref.weights[q] * normal_pdf(z) * level(i + 1, next);
    }
    return half * sum;
  }

  double integrate(int points) {
    ref = gauss_legendre(points, -1.0, 1.0);
    return level(0, {});
  }
};

// Cholesky factor of the covariance with variables reordered greedily so that the most
// constrained one comes first (Genz and Bretz); the rectangle is symmetric, so only the
// order changes, not the bounds.
Eigen::MatrixXd ordered_cholesky(Eigen::MatrixXd c, double a) {
  const Eigen::Index k = c.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index best = i;
    double best_p = 2.0;
    for (Eigen::Index j = i; j < k; ++j) {
      const double s = l.row(j).head(i).dot(y.head(i));
      const double var = c(j, j) - l.row(j).head(i).squaredNorm();
      if (!(var > 0.0)) throw NumericalError("sub-covariance is not positive definite");
      const double sd = std::sqrt(var);
      const double p = normal_interval((-a - s) / sd, (a - s) / sd);
      if (p < best_p) {
        best_p = p;
        best = j;
      }
    }
    if (best != i) {
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      l.row(i).swap(l.row(best));
    }
    const double var = c(i, i) - l.row(i).head(i).squaredNorm();
    if (!(var > 0.0)) throw NumericalError("sub-covariance is not positive definite");
    l(i, i) = std::sqrt(var);
    for (Eigen::Index j = i + 1; j < k; ++j) l(j, i) = (c(j, i) - l.row(j).head(i).dot(l.row(i).head(i))) / l(i, i);
    const double s = l.row(i).head(i).dot(y.head(i));
    const double lo = (-a - s) / l(i, i), hi = (a - s) / l(i, i);
    const double mass = normal_interval(lo, hi);
    y[i] = mass > 0.0 ? (normal_pdf(lo) - normal_pdf(hi)) / mass : 0.5 * (lo + hi);
  }
  return l;
}

// Genz separation of variables on shifted rank-1 lattices (Richtmyer generators).
RectangleProbability lattice_rule(const Eigen::MatrixXd& chol, double a) {
  constexpr std::array<double, kMaxRectangleDim> primes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  constexpr int kShifts = 16;
  constexpr double kTargetError = 3e-7;
  constexpr std::uint64_t kMaxPoints = std::uint64_t{1} << 17;
  const int k = static_cast<int>(chol.rows());

  std::array<double, kMaxRectangleDim> gen{};
  for (int j = 0; j < k; ++j) gen[j] = std::fmod(std::sqrt(primes[j]), 1.0);
  std::array<std::array<double, kMaxRectangleDim>, kShifts> shifts{};
  for (int r = 0; r < kShifts; ++r) {
    CounterStream rng(0x5eed, StreamDomain::quadrature, static_cast<std::uint64_t>(r), static_cast<std::uint32_t>(k));
    for (int j = 0; j < k; ++j) shifts[r][j] = rng.uniform();
  }

  auto integrand = [&](const std::array<double, kMaxRectangleDim>& w) {
    std::array<double, kMaxRectangleDim> y{};
    double f = 1.0;
    for (int i = 0; i < k; ++i) {
      double s = 0.0;
      for (int j = 0; j < i; ++j) s += chol(i, j) * y[j];
      const double lo = (-a - s) / chol(i, i);
      const double hi = (a - s) / chol(i, i);
      const double mass = normal_interval(lo, hi);
      f *= mass;
      if (f <= 0.0) return 0.0;
      if (i + 1 < k) {
        const double u = w[i];
        y[i] = lo >= 0.0 ? -normal_quantile(normal_sf(hi) + (1.0 - u) * mass)
                         : normal_quantile(normal_cdf(lo) + u * mass);
      }
    }
    return f;
  };

  // The points frac(i * gen + shift) form an extensible (Kronecker) sequence, so doubling
  // the count only adds the new indices.
  std::array<double, kShifts> sums{};
  std::uint64_t done = 0;
  RectangleProbability out;
  for (std::uint64_t points = 2048;; points *= 2) {
    for (int r = 0; r < kShifts; ++r) {
      std::array<double, kMaxRectangleDim> w{};
      for (std::uint64_t i = done; i < points; ++i) {
        for (int j = 0; j + 1 < k; ++j) {
          const double t = std::fmod(static_cast<double>(i) * gen[j] + shifts[r][j], 1.0);
          w[j] = 1.0 - std::fabs(2.0 * t - 1.0);  // periodizing tent transform
        }
        sums[r] += integrand(w);
      }
    }
    done = points;
    std::array<double, kShifts> est{};
    for (int r = 0; r < kShifts; ++r) est[r] = sums[r] / static_cast<double>(points);
    const double mean = sample_mean(est);
    double ss = 0.0;
    for (double v : est) ss += (v - mean) * (v - mean);
    out = {mean, std::sqrt(ss / (kShifts * (kShifts - 1.0)))};
    if (out.error <= kTargetError || points >= kMaxPoints) break;
  }
  return out;
}

}  // namespace

RectangleProbability rectangle_probability(const Eigen::MatrixXd& covariance, std::span<const SiteIndex> subset,
                                           double a) {
  if (!(a > 0.0)) throw ConfigError("rectangle probability needs a > 0");
  const std::size_t k = subset.size();
  if (k == 0) return {1.0, 0.0};
  if (k > kMaxRectangleDim) throw ConfigError("rectangle probability is limited to 12 sites");
  if (std::isinf(a)) return {1.0, 0.0};

  Eigen::MatrixXd sub(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) sub(i, j) = covariance(subset[i], subset[j]);
  if (k == 1) {
    const double s = std::sqrt(sub(0, 0));
    return {1.0 - 2.0 * normal_sf(a / s), 0.0};
  }
  const Eigen::MatrixXd chol = ordered_cholesky(sub, a);
  const double scale = std::sqrt(sub.diagonal().maxCoeff());
  if (!(chol.diagonal().minCoeff() >= 1e-8 * scale)) throw NumericalError("sub-covariance is ill-conditioned");

  if (k <= 4) {
    TensorRule rule{chol, a, {}};
    const double fine = rule.integrate(64);
    const double coarse = rule.integrate(32);
    return {fine, std::max(std::fabs(fine - coarse), 1e-15)};
  }
  return lattice_rule(chol, a);
}

FreeEnergyEstimate free_energy_expansion(const Box& box, std::span<const double> rewards, double a) {
  if (rewards.size() != box.volume()) throw ConfigError("reward count does not match box volume");
  FreeEnergyEstimate est;
  est.method = EstimatorMethod::oracle_expansion;

  std::vector<SiteIndex> support;
  std::vector<double> coeff;
  for (SiteIndex x = 0; x < box.volume(); ++x) {
    if (rewards[x] != 0.0) {
      support.push_back(x);
      coeff.push_back(std::expm1(rewards[x]));
    }
  }
  if (support.empty()) return est;
  if (support.size() > kMaxExpansionSites)
    throw ConfigError("subset expansion is limited to 12 sites with nonzero reward (got " +
                      std::to_string(support.size()) + ")");

  const GreenFunction green(box);
  double total = 0.0, error = 0.0;
  std::vector<SiteIndex> subset;
  const std::uint32_t masks = 1u << support.size();
  for (std::uint32_t mask = 0; mask < masks; ++mask) {
    subset.clear();
    double weight = 1.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (mask & (1u << i)) {
        subset.push_back(support[i]);
        weight *= coeff[i];
      }
    }
    if (weight == 0.0) continue;
    const RectangleProbability rect = rectangle_probability(green.matrix(), subset, a);
    total += weight * rect.value;
    error += std::fabs(weight) * rect.error;
  }
  est.diagnostics.samples = masks;
  if (!(total > 0.0) || total - error <= 0.0)
    throw NumericalError("subset expansion sum is not positive within its quadrature error");
  const double volume = static_cast<double>(box.volume());
  est.value = std::log(total) / volume;
  est.std_error = std::max(error / total / volume, kErrorFloor);
  return est;
}

std::string oracle_generator_version() { return std::string("gffpin-oracle ") + GFFPIN_VERSION; }

void to_json(nlohmann::json& j, const OracleFixture& f) {
  j = {{"d", f.d},         {"n", f.n},     {"a", f.a},           {"law", f.law},
       {"b", f.b},         {"h", f.h},     {"env_seed", f.env_seed}, {"f_exact", f.f_exact},
       {"tol", f.tol},     {"generator_version", f.generator_version}};
}

void from_json(const nlohmann::json& j, OracleFixture& f) {
  j.at("d").get_to(f.d);
  j.at("n").get_to(f.n);
  j.at("a").get_to(f.a);
  j.at("law").get_to(f.law);
  j.at("b").get_to(f.b);
  j.at("h").get_to(f.h);
  j.at("env_seed").get_to(f.env_seed);
  j.at("f_exact").get_to(f.f_exact);
  j.at("tol").get_to(f.tol);
  j.at("generator_version").get_to(f.generator_version);
}

std::vector<OracleFixture> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read fixture file " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  return j.get<std::vector<OracleFixture>>();
}

}  // namespace gffpin
