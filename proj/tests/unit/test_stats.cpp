#include <doctest.h>

#include <cmath>
#include <vector>

#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/rng.hpp"
#include "gffpin/stats.hpp"

using namespace gffpin;

namespace {

std::vector<double> gaussian_series(std::size_t n, std::uint64_t seed) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = normal_quantile(CounterStream(seed, StreamDomain::dynamics, 0, static_cast<std::uint32_t>(i)).uniform());
  return x;
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("batch means of white noise") {
    const auto x = gaussian_series(64000, 1);
    const MeanError m = batch_means(x, 32);
    CHECK(std::abs(m.mean) < 5.0 / std::sqrt(64000.0));
    CHECK(m.error == doctest::Approx(1.0 / std::sqrt(64000.0)).epsilon(0.35));
  }

  TEST_CASE("batch means guards") {
    const std::vector<double> x(100, 1.0);
    CHECK_THROWS_AS(batch_means(x, 4), StatisticsGuardError);
    CHECK_THROWS_AS(batch_means(std::vector<double>(10, 1.0), 32), StatisticsGuardError);
    const MeanError c = batch_means(x, 10);
    CHECK(c.mean == 1.0);
    CHECK(c.error == 0.0);
  }

  TEST_CASE("autocorrelation time of AR(1)") {
    const double rho = 0.9;
    auto x = gaussian_series(400000, 2);
    for (std::size_t i = 1; i < x.size(); ++i) x[i] = rho * x[i - 1] + std::sqrt(1 - rho * rho) * x[i];
    const double exact = 0.5 * (1 + rho) / (1 - rho);
    CHECK(integrated_autocorrelation_time(x) == doctest::Approx(exact).epsilon(0.15));
    CHECK(integrated_autocorrelation_time(gaussian_series(100000, 3)) == doctest::Approx(0.5).epsilon(0.1));
    CHECK(integrated_autocorrelation_time(std::vector<double>(1000, 2.5)) == 0.5);
  }

  TEST_CASE("sample variance") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const MeanError v = sample_variance(x);
    CHECK(v.mean == doctest::Approx(5.0 / 3.0));
    CHECK(v.error == doctest::Approx(std::sqrt(2.0 / 3.0) * 5.0 / 3.0));
  }

  TEST_CASE("jackknife of log mean") {
    const std::vector<double> sums{2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0};
    const std::vector<double> counts(8, 1.0);
    const MeanError j = jackknife_log_mean(sums, counts);
    CHECK(j.mean == doctest::Approx(std::log(2.0)));
    CHECK(j.error == doctest::Approx(0.0));
    // delta method: SE(log mean) ~ SE(mean) / mean for small noise
    std::vector<double> noisy(64);
    const auto z = gaussian_series(64, 4);
    for (int i = 0; i < 64; ++i) noisy[i] = 5.0 + 0.1 * z[i];
    const MeanError k = jackknife_log_mean(noisy, std::vector<double>(64, 1.0));
    CHECK(k.error == doctest::Approx(0.1 / 5.0 / 8.0).epsilon(0.3));
  }

  TEST_CASE("line fits") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 3.0, 5.0, 7.0};
    const LinearFit f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    const LinearFit g = fit_line(x, std::vector<double>{0.0, 2.0, 4.0, 6.0}, true);
    CHECK(g.slope == doctest::Approx(2.0));
    CHECK(g.intercept == 0.0);
    CHECK(g.r2 == doctest::Approx(1.0));
  }

  TEST_CASE("Gauss-Legendre") {
    const Quadrature q = gauss_legendre(16);
    double w = 0.0, p31 = 0.0;
    for (int i = 0; i < 16; ++i) {
      CHECK(q.nodes[i] > 0.0);
      CHECK(q.nodes[i] < 1.0);
      w += q.weights[i];
      p31 += q.weights[i] * std::pow(q.nodes[i], 31);
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p31 == doctest::Approx(1.0 / 32.0).epsilon(1e-13));
    const Quadrature r = gauss_legendre(5, -1.0, 2.0);
    double cube = 0.0;
    for (int i = 0; i < 5; ++i) cube += r.weights[i] * r.nodes[i] * r.nodes[i] * r.nodes[i];
    CHECK(cube == doctest::Approx((16.0 - 1.0) / 4.0).epsilon(1e-14));
  }
}
