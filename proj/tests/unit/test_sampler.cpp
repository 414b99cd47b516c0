#include <doctest.h>

#include <array>
#include <cmath>
#include <memory>
#include <sstream>

#include "gffpin/error.hpp"
#include "gffpin/estimators.hpp"
#include "gffpin/normal.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/sampler.hpp"
#include "gffpin/stats.hpp"

using namespace gffpin;

namespace {

std::shared_ptr<const Box> make_box(int d, int n) { return std::make_shared<const Box>(d, n); }

// Pin probability of one site with no neighbors, computed straight from erf.
double single_site_pin(double w) {
  const double p = std::erf(1.0 / std::sqrt(2.0));
  return std::exp(w) * p / (std::exp(w) * p + 1.0 - p);
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("hamiltonian") {
    const Box one(2, 1), four(2, 2);
    CHECK(hamiltonian(FieldState::zeros(four, 0), four) == 0.0);
    FieldState s = FieldState::zeros(one, 0);
    s.phi[0] = 1.7;
    CHECK(hamiltonian(s, one) == doctest::Approx(1.7 * 1.7 / 2.0).epsilon(1e-15));
    FieldState t{{1.0, 1.0, 1.0, 1.0}, 0, 0};
    CHECK(hamiltonian(t, four) == doctest::Approx(1.0).epsilon(1e-15));
    FieldState u{{1.0, 0.0, 0.0, 0.0}, 0, 0};
    // 2 boundary edges plus 2 interior edges, each (1 - 0)^2 / 8
    CHECK(hamiltonian(u, four) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("conditional mean is the neighbor average") {
    const Box two(2, 3);
    FieldState s = FieldState::zeros(two, 0);
    const SiteIndex c = two.center();
    CHECK(conditional_params(s, two, c).mean == 0.0);
    s.phi[two.neighbors(c)[1]] = 4.0;
    CHECK(conditional_params(s, two, c).mean == 1.0);
    CHECK(conditional_params(s, two, c).stddev == 1.0);
    const Box three(3, 3);
    FieldState t = FieldState::zeros(three, 0);
    for (SiteIndex y : three.neighbors(three.center())) t.phi[y] = 1.0;
    CHECK(conditional_params(t, three, three.center()).mean == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("pin probability") {
    CHECK(pin_probability(0.0, 1.0, 0.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))).epsilon(1e-14));
    CHECK(pin_probability(0.0, 1.0, 0.0) == doctest::Approx(0.682689).epsilon(1e-6));
    CHECK(pin_probability(0.0, 1.0, INFINITY) == 1.0);
    CHECK(pin_probability(0.0, 1.0, 60.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pin_probability(0.0, 1.0, 0.5) == doctest::Approx(single_site_pin(0.5)).epsilon(1e-14));
    CHECK(pin_probability(0.0, 1.0, 0.5) == doctest::Approx(0.780085).epsilon(1e-6));
    CHECK(pin_probability(3.0, 1.0, 0.0) == doctest::Approx(normal_cdf(-2.0) - normal_cdf(-4.0)).epsilon(1e-13));
    CHECK(pin_probability(-3.0, 1.0, 0.0) == pin_probability(3.0, 1.0, 0.0));
    CHECK(pin_probability(30.0, 1.0, 0.0) > 0.0);  // about e^-420, still a normal double
  }

  TEST_CASE("single site: pin frequency") {
    const auto box = make_box(2, 1);
    const Model model(box, std::vector<double>{0.5}, 1.0);
    FieldState s = FieldState::zeros(*box, 77);
    const int n = 1000000;
    double hits = 0.0;
    for (int i = 0; i < n; ++i) {
      sweep(s, model, SweepOrder::sequential);
      hits += std::fabs(s.phi[0]) <= 1.0;
    }
    const double q = single_site_pin(0.5);
    const double freq = hits / n;
    CHECK(std::abs(freq - q) < 3.0 * std::sqrt(q * (1 - q) / n));
    CHECK(std::abs(freq - 0.780) < 0.003);
  }

  TEST_CASE("single site without reward: centered, unit variance") {
    const auto box = make_box(2, 1);
    const Model model(box, std::vector<double>{0.0}, 1.0);
    FieldState s = FieldState::zeros(*box, 78);
    const int n = 200000;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
      sweep(s, model, SweepOrder::sequential);
      x[i] = s.phi[0];
    }
    const MeanError m = batch_means(x);
    CHECK(std::abs(m.mean) < 5.0 * m.error);
    CHECK(sample_variance(x).mean == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("over-relaxation preserves the single-site law") {
    const auto box = make_box(2, 1);
    const Model model(box, std::vector<double>{0.5}, 1.0);
    FieldState s = FieldState::zeros(*box, 79);
    const int n = 300000;
    std::vector<double> hits(n);
    for (int i = 0; i < n; ++i) {
      overrelax_sweep(s, model);
      sweep(s, model, SweepOrder::checkerboard);
      overrelax_sweep(s, model);
      hits[i] = std::fabs(s.phi[0]) <= 1.0;
    }
    const MeanError m = batch_means(hits);
    CHECK(std::abs(m.mean - single_site_pin(0.5)) < 3.0 * m.error);
  }

  TEST_CASE("odd moments vanish by reflection symmetry") {
    const auto box = make_box(2, 4);
    std::vector<double> w(box->volume());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 * (static_cast<double>(i % 3) - 0.5);
    const Model model(box, w, 1.0);
    for (SweepOrder order : {SweepOrder::sequential, SweepOrder::checkerboard}) {
      FieldState s = FieldState::zeros(*box, 80);
      for (int i = 0; i < 500; ++i) sweep(s, model, order);
      std::vector<double> x1, x3;
      for (int i = 0; i < 40000; ++i) {
        sweep(s, model, order);
        x1.push_back(s.phi[5]);
        x3.push_back(std::pow(s.phi[5], 3));
      }
      const MeanError m1 = batch_means(x1), m3 = batch_means(x3);
      CHECK(std::abs(m1.mean) < 5.0 * m1.error);
      CHECK(std::abs(m3.mean) < 5.0 * m3.error);
    }
  }

  TEST_CASE("free field on a 3x3 box matches the Green function") {
    const auto box = make_box(2, 3);
    const Model model(box, std::vector<double>(9, 0.0), 1.0);
    const GreenFunction green(*box);
    FieldState s = FieldState::zeros(*box, 81);
    for (int i = 0; i < 200; ++i) sweep(s, model, SweepOrder::checkerboard);
    std::vector<double> sq, corner;
    for (int i = 0; i < 100000; ++i) {
      sweep(s, model, SweepOrder::checkerboard);
      sq.push_back(s.phi[box->center()] * s.phi[box->center()]);
      corner.push_back(s.phi[0] * s.phi[box->center()]);
    }
    const MeanError v = batch_means(sq), c = batch_means(corner);
    CHECK(std::abs(v.mean - green(box->center(), box->center())) < 3.0 * v.error);
    CHECK(std::abs(c.mean - green(0, box->center())) < 3.0 * c.error);
  }

  TEST_CASE("trajectories do not depend on the worker count") {
    const auto box = make_box(2, 48);  // more than one chunk per parity class
    std::vector<double> w(box->volume());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(static_cast<double>(i));
    const Model model(box, w, 1.0, 0.7);
    FieldState a = FieldState::zeros(*box, 82), b = a;
    WorkerPool pool(4);
    SweepSummary sa, sb;
    for (int i = 0; i < 20; ++i) {
      overrelax_sweep(a, model);
      overrelax_sweep(b, model, &pool);
      sa = sweep(a, model, SweepOrder::checkerboard);
      sb = sweep(b, model, SweepOrder::checkerboard, &pool);
    }
    CHECK(a.phi == b.phi);
    CHECK(a.sweep_count == b.sweep_count);
    CHECK(sa.pin == sb.pin);
    CHECK(sa.weighted_pin == sb.weighted_pin);
  }

  TEST_CASE("pinned sets") {
    const Box four(1, 4);
    const PinnedSet zero = pinned_set(FieldState::zeros(four, 0), 1.0);
    CHECK(zero.cardinality() == 4);
    const PinnedSet none = pinned_set(FieldState{{2.0, -3.0, 1.5, 9.0}, 0, 0}, 1.0);
    CHECK(none.cardinality() == 0);
    const PinnedSet some = pinned_set(FieldState{{0.5, -2.0, 0.9, 3.0}, 0, 0}, 1.0);
    CHECK(some.cardinality() == 2);
    CHECK(some.members() == std::vector<SiteIndex>{0, 2});
    CHECK(some.contains(0));
    CHECK_FALSE(some.contains(1));
  }

  TEST_CASE("snapshot round trip") {
    const Box box(2, 5);
    FieldState s = FieldState::zeros(box, 83);
    for (std::size_t i = 0; i < s.phi.size(); ++i) s.phi[i] = std::sqrt(static_cast<double>(i)) - 2.0;
    s.sweep_count = 1234;
    std::stringstream io;
    write_snapshot(io, box, s);
    const FieldState back = read_snapshot(io, box);
    CHECK(back.phi == s.phi);
    CHECK(back.seed == 83);
    CHECK(back.sweep_count == 1234);
    std::stringstream again;
    write_snapshot(again, box, s);
    CHECK_THROWS_AS(read_snapshot(again, Box(2, 4)), ConfigError);
  }

  TEST_CASE("model validation") {
    const auto box = make_box(1, 3);
    CHECK_THROWS_AS(Model(box, std::vector<double>(3, 0.0), 0.0), ConfigError);
    CHECK_THROWS_AS(Model(box, std::vector<double>(2, 0.0), 1.0), ConfigError);
    CHECK_THROWS_AS(Model(box, std::vector<double>(3, 0.0), 1.0, 1.5), ConfigError);
    CHECK(default_burn_in(Box(2, 8)) == 640);
    CHECK(default_burn_in(Box(3, 8)) == 80);
  }
}

TEST_SUITE("sampler_slow") {
  TEST_CASE("free field on a 64x64 box: center variance matches the Green diagonal") {
    const auto box = make_box(2, 64);
    const Model model(box, std::vector<double>(box->volume(), 0.0), 1.0);
    FieldState s = FieldState::zeros(*box, 84);
    const SiteIndex c = box->center();
    const double exact = green_column(*box, c)[c];
    // burn-in of 5 n^2 heat-bath-equivalent sweeps, over-relaxation to decorrelate faster
    for (int i = 0; i < 5 * 64 * 64 / 3; ++i) {
      overrelax_sweep(s, model);
      overrelax_sweep(s, model);
      sweep(s, model, SweepOrder::checkerboard);
    }
    std::vector<double> sq;
    for (int i = 0; i < 30000; ++i) {
      overrelax_sweep(s, model);
      overrelax_sweep(s, model);
      sweep(s, model, SweepOrder::checkerboard);
      sq.push_back(s.phi[c] * s.phi[c]);
    }
    const MeanError v = batch_means(sq);
    MESSAGE("Var(center) = " << v.mean << " +- " << v.error << ", G(c,c) = " << exact);
    CHECK(std::abs(v.mean - exact) < 3.0 * v.error);
  }
}
