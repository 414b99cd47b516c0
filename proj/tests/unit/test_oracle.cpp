#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gffpin/environment.hpp"
#include "gffpin/error.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/stats.hpp"

using namespace gffpin;

namespace {

// P(|X_i| <= a, i < k) for unit variances and common correlation rho, as a 1-d integral
// over the shared factor (composite Simpson).
double equicorrelated_rectangle(int k, double rho, double a) {
  const int m = 4000;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / m;
  const double s = std::sqrt(rho), r = std::sqrt(1.0 - rho);
  auto f = [&](double z) {
    const double p = normal_cdf((a - s * z) / r) - normal_cdf((-a - s * z) / r);
    return normal_pdf(z) * std::pow(p, k);
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < m; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

Eigen::MatrixXd equicorrelated(int k, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(k, k, rho);
  c.diagonal().setOnes();
  return c;
}

std::vector<SiteIndex> first(int k) {
  std::vector<SiteIndex> v(k);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("single-site covariance") {
    const Box one(2, 1);
    CHECK(GreenFunction(one)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(precision_matrix(one)(0, 0) == 1.0);
  }

  TEST_CASE("two sites on a line") {
    const Box line(1, 2);
    const Eigen::MatrixXd q = precision_matrix(line);
    CHECK(q(0, 0) == 1.0);
    CHECK(q(0, 1) == -0.5);
    const GreenFunction g(line);
    CHECK(g(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(g(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }

  TEST_CASE("conjugate gradients agree with the dense inverse") {
    const Box box(2, 9);
    const GreenFunction g(box);
    const auto col = green_column(box, 40);
    for (SiteIndex y = 0; y < box.volume(); ++y) CHECK(col[y] == doctest::Approx(g(y, 40)).epsilon(1e-9));
    std::vector<double> qv(box.volume());
    apply_precision(box, col, qv);
    for (SiteIndex y = 0; y < box.volume(); ++y) CHECK(qv[y] == doctest::Approx(y == 40 ? 1.0 : 0.0).epsilon(1e-9));
    CHECK_THROWS_AS(GreenFunction(Box(2, 65)), ConfigError);
  }

  TEST_CASE("exact free-field draws") {
    const Box one(2, 1);
    const auto z = sample_free_field_exact(one, 1, 50000);
    std::vector<double> x;
    for (const auto& s : z) x.push_back(s.phi[0]);
    const MeanError m = batch_means(x);
    CHECK(std::abs(m.mean) < 5.0 * m.error);
    CHECK(sample_variance(x).mean == doctest::Approx(1.0).epsilon(0.03));

    const Box box(2, 3);
    const auto draws = sample_free_field_exact(box, 2, 50000);
    std::vector<double> c2;
    for (const auto& s : draws) c2.push_back(s.phi[box.center()] * s.phi[box.center()]);
    const MeanError v = batch_means(c2);
    CHECK(std::abs(v.mean - GreenFunction(box)(box.center(), box.center())) < 5.0 * v.error);

    const ExactFreeFieldSampler sampler(box);
    std::vector<double> a(9), b(9);
    sampler.draw(3, 17, a);
    sampler.draw(3, 17, b);
    CHECK(a == b);
  }

  TEST_CASE("rectangle probabilities: trivial cases") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    CHECK(rectangle_probability(one, {}, 1.0).value == 1.0);
    const std::vector<SiteIndex> s0{0};
    CHECK(rectangle_probability(one, s0, 1.0).value == doctest::Approx(0.682689492137086).epsilon(1e-14));
    CHECK(rectangle_probability(one, s0, INFINITY).value == 1.0);
    CHECK(rectangle_probability(one, s0, 40.0).value == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("rectangle probabilities: independent coordinates factor") {
    for (int k : {2, 4, 6, 9}) {
      const auto r = rectangle_probability(Eigen::MatrixXd::Identity(k, k), first(k), 0.8);
      CHECK(r.value == doctest::Approx(std::pow(std::erf(0.8 / std::sqrt(2.0)), k)).epsilon(1e-6));
    }
  }

  TEST_CASE("rectangle probabilities: equicorrelated") {
    for (int k : {2, 3, 4}) {
      const auto r = rectangle_probability(equicorrelated(k, 0.4), first(k), 1.0);
      CHECK(std::abs(r.value - equicorrelated_rectangle(k, 0.4, 1.0)) < 1e-10);
      CHECK(r.error < 1e-10);
    }
    for (int k : {5, 8, 12}) {
      const auto r = rectangle_probability(equicorrelated(k, 0.6), first(k), 1.2);
      const double exact = equicorrelated_rectangle(k, 0.6, 1.2);
      CHECK(std::abs(r.value - exact) < std::max(3.0 * r.error, 1e-9));
      CHECK(r.error < 1e-5);
    }
    CHECK_THROWS_AS(rectangle_probability(Eigen::MatrixXd::Identity(13, 13), first(13), 1.0), ConfigError);
  }

  TEST_CASE("rectangle probabilities on a Green function subset") {
    const Box box(2, 3);
    const GreenFunction g(box);
    const std::vector<SiteIndex> sub{0, 4};
    const double s0 = std::sqrt(g(0, 0)), s4 = std::sqrt(g(4, 4));
    const double rho = g(0, 4) / (s0 * s4);
    // bivariate check by conditioning on phi_4, Simpson in its standardized value
    const int m = 4000;
    const double lo = -1.0 / s4, hi = 1.0 / s4, h = (hi - lo) / m;
    auto f = [&](double z) {
      const double mu = rho * z, sd = std::sqrt(1 - rho * rho);
      return normal_pdf(z) * (normal_cdf((1.0 / s0 - mu) / sd) - normal_cdf((-1.0 / s0 - mu) / sd));
    };
    double sum = f(lo) + f(hi);
    for (int i = 1; i < m; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    CHECK(rectangle_probability(g.matrix(), sub, 1.0).value == doctest::Approx(sum * h / 3.0).epsilon(1e-10));
  }

  TEST_CASE("expansion: single site") {
    const Box one(2, 1);
    const std::vector<double> w{0.5};
    const FreeEnergyEstimate e = free_energy_expansion(one, w, 1.0);
    CHECK(e.value == doctest::Approx(std::log1p(std::expm1(0.5) * std::erf(1 / std::sqrt(2.0)))).epsilon(1e-14));
    CHECK(e.value == doctest::Approx(0.366638).epsilon(1e-6));
    CHECK(e.method == EstimatorMethod::oracle_expansion);
  }

  TEST_CASE("expansion: one rewarded site") {
    // the sum collapses to 1 + (e^w - 1) P(|phi_x| <= a)
    const Box box(2, 3);
    std::vector<double> w(9, 0.0);
    w[4] = 0.9;
    const double p = std::erf(1.0 / std::sqrt(2.0 * GreenFunction(box)(4, 4)));
    CHECK(free_energy_expansion(box, w, 1.0).value == doctest::Approx(std::log1p(std::expm1(0.9) * p) / 9.0).epsilon(1e-13));
  }

  TEST_CASE("expansion rejects oversized supports") {
    const Box box(2, 4);
    CHECK_THROWS_AS(free_energy_expansion(box, std::vector<double>(16, 0.1), 1.0), ConfigError);
  }

  TEST_CASE("frozen fixtures are reproduced") {
    const auto fixtures = load_fixtures(GFFPIN_FIXTURES);
    REQUIRE(fixtures.size() >= 3);
    int checked = 0;
    for (const auto& fx : fixtures) {
      const Box box(fx.d, fx.n);
      if (box.volume() > 4) continue;  // larger ones are covered by the acceptance run
      const auto env = sample_environment(DisorderLaw::from_name(fx.law), {fx.a, fx.b, fx.h}, box, fx.env_seed);
      const FreeEnergyEstimate e = free_energy_expansion(box, env.rewards, fx.a);
      CHECK(std::abs(e.value - fx.f_exact) <= std::max(fx.tol, 1e-12));
      ++checked;
    }
    CHECK(checked >= 2);
  }
}
