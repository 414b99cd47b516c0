#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gffpin/normal.hpp"
#include "gffpin/rng.hpp"

using namespace gffpin;

TEST_SUITE("rng") {
  TEST_CASE("philox4x32-10 known answers") {
    using W = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          W{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          W{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("streams depend only on their address") {
    CounterStream a(42, StreamDomain::dynamics, 7, 3);
    CounterStream noise(42, StreamDomain::dynamics, 7, 4);
    for (int i = 0; i < 5; ++i) noise.uniform();
    CounterStream b(42, StreamDomain::dynamics, 7, 3);
    for (int i = 0; i < 9; ++i) CHECK(a.uniform() == b.uniform());
  }

  TEST_CASE("domains, steps, sites and seeds give different draws") {
    std::set<double> first;
    first.insert(CounterStream(1, StreamDomain::dynamics, 0, 0).uniform());
    first.insert(CounterStream(1, StreamDomain::environment, 0, 0).uniform());
    first.insert(CounterStream(1, StreamDomain::dynamics, 1, 0).uniform());
    first.insert(CounterStream(1, StreamDomain::dynamics, 0, 1).uniform());
    first.insert(CounterStream(2, StreamDomain::dynamics, 0, 0).uniform());
    first.insert(CounterStream(1, StreamDomain::dynamics, std::uint64_t{1} << 32, 0).uniform());
    CHECK(first.size() == 6);
  }

  TEST_CASE("uniforms lie in the open unit interval with the right mean") {
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = CounterStream(9, StreamDomain::dynamics, 0, static_cast<std::uint32_t>(i)).uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  }

  TEST_CASE("derived seeds") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
  }
}

TEST_SUITE("normal") {
  TEST_CASE("quantile inverts the cdf") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(0.5) == 0.0);
    for (double x : {-30.0, -8.0, -1.3, 0.2, 2.5, 4.5})
      CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    CHECK(normal_quantile(normal_sf(7.9)) == doctest::Approx(-7.9).epsilon(1e-12));
  }

  TEST_CASE("log upper tail") {
    CHECK(log_normal_sf(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(log_normal_sf(3.0) == doctest::Approx(std::log(normal_sf(3.0))).epsilon(1e-13));
    // Mills ratio series: sf(x) = pdf(x)/x (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
    const double x = 60.0;
    const double series = -0.5 * x * x - std::log(x * std::sqrt(2.0 * M_PI)) +
                          std::log1p(-1.0 / (x * x) + 3.0 / std::pow(x, 4) - 15.0 / std::pow(x, 6));
    CHECK(log_normal_sf(x) == doctest::Approx(series).epsilon(1e-12));
    CHECK(std::isfinite(log_normal_sf(-40.0)));
  }

  TEST_CASE("well masses") {
    const WellMasses m = well_masses(0.0, 1.0);
    CHECK(std::exp(m.log_inside) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))).epsilon(1e-14));
    CHECK(std::exp(m.log_inside) + std::exp(m.log_outside) == doctest::Approx(1.0).epsilon(1e-14));
    const WellMasses far = well_masses(50.0, 1.0);
    CHECK(far.log_outside == doctest::Approx(0.0));
    CHECK(far.log_inside < -1000.0);
  }

  TEST_CASE("deep tail sampler (rejection branch)") {
    const double lo = 10.0;
    const double mass = normal_sf(lo);
    REQUIRE(mass < kInverseCdfMassFloor);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      CounterStream rng(5, StreamDomain::dynamics, 0, static_cast<std::uint32_t>(i));
      const double z = sample_upper_tail(lo, mass, rng);
      REQUIRE(z > lo);
      sum += z;
      sum2 += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    const double exact = normal_pdf(lo) / mass;  // E[Z | Z > lo]
    CHECK(std::abs(mean - exact) < 5.0 * sd / std::sqrt(n));
  }

  TEST_CASE("interval sampler matches the truncated cdf") {
    const double lo = -0.3, hi = 1.7;
    const int n = 100000;
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) {
      CounterStream rng(6, StreamDomain::dynamics, 1, static_cast<std::uint32_t>(i));
      z[i] = sample_interval(lo, hi, rng);
    }
    std::sort(z.begin(), z.end());
    CHECK(z.front() >= lo);
    CHECK(z.back() <= hi);
    const double mass = normal_cdf(hi) - normal_cdf(lo);
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double f = (normal_cdf(z[i]) - normal_cdf(lo)) / mass;
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 1.63 / std::sqrt(n));  // 1% Kolmogorov critical value
  }
}
