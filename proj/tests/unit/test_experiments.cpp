#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gffpin/error.hpp"
#include "gffpin/experiments.hpp"
#include "gffpin/lattice.hpp"

using namespace gffpin;

namespace {

ThermoOptions quick_thermo() {
  ThermoOptions o;
  o.nodes = 6;
  o.sweeps = 800;
  o.max_sweeps = 4000;
  return o;
}

// E log(lambda gamma + 1 - lambda) for standard Gaussian e, trapezoid rule on [-14, 14].
double gaussian_expectation(double b, double lambda) {
  const double h = 1e-3;
  double sum = 0.0;
  for (int i = -14000; i <= 14000; ++i) {
    const double z = i * h;
    const double gamma = std::exp(b * z - 0.5 * b * b);
    sum += std::exp(-0.5 * z * z) * std::log(lambda * gamma + 1.0 - lambda);
  }
  return sum * h / std::sqrt(2.0 * M_PI);
}

double bernoulli_expectation(double b, double lambda) {
  const double lc = std::log(std::cosh(b));
  const double gp = std::exp(b - lc), gm = std::exp(-b - lc);
  return 0.5 * std::log(lambda * gp + 1 - lambda) + 0.5 * std::log(lambda * gm + 1 - lambda);
}

}  // namespace

TEST_SUITE("gap_bound") {
  TEST_CASE("no disorder gives zero") {
    for (double lambda : {0.1, 0.5, 1.0}) {
      CHECK(gap_expectation(DisorderLaw::bernoulli(), {1.0, 0.0, 0.3}, lambda) == 0.0);
      CHECK(gap_expectation(DisorderLaw::gaussian(), {1.0, 0.0, 0.3}, lambda) == 0.0);
      CHECK(gap_expectation(DisorderLaw::constant(), {1.0, 2.0, 0.3}, lambda) == 0.0);
    }
  }

  TEST_CASE("Bernoulli closed form") {
    for (double b : {0.1, 0.7, 1.5})
      for (double lambda : {0.05, 0.3, 0.9}) {
        const double v = gap_expectation(DisorderLaw::bernoulli(), {1.0, b, 0.2}, lambda);
        CHECK(std::abs(v - bernoulli_expectation(b, lambda)) < 1e-13);
        CHECK(v < 0.0);
      }
  }

  TEST_CASE("Gaussian quadrature") {
    for (double b : {0.2, 1.0, 2.0})
      for (double lambda : {0.1, 0.5, 0.9}) {
        const double v = gap_expectation(DisorderLaw::gaussian(), {1.0, b, 0.0}, lambda);
        CHECK(std::abs(v - gaussian_expectation(b, lambda)) < 1e-10);
        CHECK(v < 0.0);
      }
  }

  TEST_CASE("lambda formulas") {
    GapBoundSpec s{DisorderLaw::bernoulli(), {1.0, 1.0, 0.0}, GapRegime::d3plus, 2.0};
    const double ell = std::log(std::cosh(1.0));
    CHECK(gap_lambda(s) == doctest::Approx(2 * ell / (1 + 2 * ell)).epsilon(1e-15));
    CHECK(evaluate_gap_bound(s) == doctest::Approx(bernoulli_expectation(1.0, gap_lambda(s))).epsilon(1e-13));
    s.regime = GapRegime::d2;
    s.c1 = 1.0;
    s.params = {1.0, 0.3, 0.0};
    const double l2 = std::log(std::cosh(0.3));
    const double lam = l2 / std::sqrt(std::fabs(std::log(l2)));
    CHECK(gap_lambda(s) == doctest::Approx(lam).epsilon(1e-15));
    const double eff = lam / std::fabs(std::log(lam));
    CHECK(evaluate_gap_bound(s) == doctest::Approx(bernoulli_expectation(0.3, eff)).epsilon(1e-13));
  }

  TEST_CASE("non-increasing in lambda") {
    for (const DisorderLaw& law : {DisorderLaw::bernoulli(), DisorderLaw::gaussian(), DisorderLaw::two_point(0.2)}) {
      double prev = 0.0;
      for (int k = 1; k <= 9; ++k) {
        const double v = gap_expectation(law, {1.0, 0.8, 0.1}, 0.1 * k);
        CHECK(v < 0.0);
        CHECK(v <= prev);
        prev = v;
      }
    }
  }

  TEST_CASE("small disorder: the bound is of order b^2 l^2") {
    // E log(1 + lambda (gamma - 1)) = -lambda^2 Var(gamma) / 2 + O(lambda^3), Var(gamma) ~ b^2,
    // lambda ~ C1 l
    for (double b : {0.02, 0.01}) {
      const double h = b * b;
      GapBoundSpec s{DisorderLaw::bernoulli(), {1.0, b, h}, GapRegime::d3plus, 1.0};
      const double ell = h + std::log(std::cosh(b));
      CHECK(evaluate_gap_bound(s) / (b * b * ell * ell) == doctest::Approx(-0.5).epsilon(0.01));
    }
  }

  TEST_CASE("lambda outside (0, 1] is rejected") {
    CHECK_THROWS_AS(gap_expectation(DisorderLaw::bernoulli(), {1.0, 1.0, 0.0}, 0.0), ConfigError);
    CHECK_THROWS_AS(gap_expectation(DisorderLaw::bernoulli(), {1.0, 1.0, 0.0}, 1.5), ConfigError);
  }

  TEST_CASE("d = 2 form is refused outside small l") {
    // l = log cosh 1 + 0.1 = 0.53: lambda = 0.67 and lambda / |log lambda| = 1.7
    GapBoundSpec s{DisorderLaw::bernoulli(), {1.0, 1.0, 0.1}, GapRegime::d2, 1.0};
    CHECK(gap_lambda(s) < 1.0);
    CHECK_THROWS_AS(evaluate_gap_bound(s), ConfigError);
    s.params.h = 0.6;  // l > 1
    CHECK_THROWS_AS(evaluate_gap_bound(s), ConfigError);
  }
}

TEST_SUITE("experiments") {
  TEST_CASE("central sites") {
    CHECK(central_sites(Box(2, 4)).size() == 4);
    CHECK(central_sites(Box(3, 6)).size() == 8);
    const Box odd(2, 5);
    REQUIRE(central_sites(odd).size() == 1);
    CHECK(central_sites(odd)[0] == odd.center());
  }

  TEST_CASE("csv output") {
    ReportTable t;
    t.columns = {"name", "x", "ok"};
    t.add({"a,b", 0.1, true});
    t.add({"plain", 2, false});
    std::ostringstream out;
    write_csv(out, t);
    CHECK(out.str() == "name,x,ok\n\"a,b\",0.10000000000000001,true\nplain,2,false\n");
    CHECK(t.column("x") == std::vector<double>{0.1, 2.0});
    CHECK_THROWS_AS(t.column("y"), ConfigError);
    CHECK_THROWS_AS(t.add({1, 2}), ConfigError);
  }

  TEST_CASE("gap without disorder is noise") {
    GapExperimentSpec s;
    s.params = {1.0, 0.0, 0.3};
    s.sizes = {4};
    s.replicates = 4;
    s.thermo = quick_thermo();
    const ScalingReport r = run_gap_experiment(s);
    CHECK(r.pass);
    CHECK(r.points.rows.size() == 5);
    const auto& size = r.fits["sizes"][0];
    CHECK(std::abs(size["gap"].get<double>()) <= 3.0 * size["gap_se"].get<double>());
    CHECK(r.fits["bound"].get<double>() == 0.0);
  }

  TEST_CASE("truncation of a constant environment changes nothing") {
    TruncationSpec s;
    s.law = DisorderLaw::constant();
    s.params = {1.0, 0.0, 0.4};
    s.cutoffs = {0.5, 1.0, 2.0};
    s.thermo = quick_thermo();
    const ScalingReport r = run_truncation_check(s);
    for (double delta : r.points.column("delta")) CHECK(delta == 0.0);
    CHECK(r.pass);
  }

  TEST_CASE("truncation above the largest reward is exact") {
    TruncationSpec s;
    s.n = 4;
    s.cutoffs = {50.0};
    s.thermo = quick_thermo();
    const ScalingReport r = run_truncation_check(s);
    CHECK(r.points.column("delta") == std::vector<double>{0.0});
    CHECK(r.points.column("truncated_sites") == std::vector<double>{0.0});
  }

  TEST_CASE("box doubling without disorder") {
    BoxDoublingSpec s;
    s.law = DisorderLaw::constant();
    s.params = {1.0, 0.0, 0.3};
    s.sizes = {2, 4};
    s.replicates = 6;
    s.thermo = quick_thermo();
    const ScalingReport r = run_box_doubling(s);
    CHECK(r.points.rows.size() == 12);
    for (const auto& size : r.fits["sizes"]) {
      // replicates differ only through the dynamics, so the spread is of the size of the SEs
      double se2 = 0.0;
      int count = 0;
      const int n = size["n"].get<int>();
      const auto ns = r.points.column("n");
      const auto ses = r.points.column("std_error");
      for (std::size_t i = 0; i < ns.size(); ++i)
        if (ns[i] == n) se2 += ses[i] * ses[i], ++count;
      CHECK(size["variance"].get<double>() < 6.0 * se2 / count);
    }
  }

  TEST_CASE("domination report layout") {
    DominationSpec s;
    s.d = 2;
    s.n = 8;
    s.eps = {0.0, 0.2};
    s.chain.sweeps = 2000;
    const DominationReport r = run_domination_test(s);
    CHECK(r.points.rows.size() == 6);
    const auto eps = r.points.column("eps");
    const auto nu = r.points.column("nu_void");
    for (std::size_t i = 0; i < eps.size(); ++i)
      if (eps[i] == 0.0) CHECK(nu[i] == 1.0);
  }

  TEST_CASE("scaling includes the exact zero point") {
    AnnealedScalingSpec s;
    s.d = 2;
    s.n = 4;
    s.ells = {0.0, 0.1, 0.2};
    s.thermo = quick_thermo();
    const ScalingReport r = run_annealed_scaling(s);
    CHECK(r.points.column("value")[0] == 0.0);
    CHECK(r.points.column("x")[1] > 0.0);
  }

  TEST_CASE("invalid experiment specs") {
    BoxDoublingSpec b;
    b.sizes = {3, 6};
    CHECK_THROWS_AS(run_box_doubling(b), ConfigError);
    GapExperimentSpec g;
    g.replicates = 1;
    CHECK_THROWS_AS(run_gap_experiment(g), ConfigError);
  }
}
