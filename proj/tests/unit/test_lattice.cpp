#include <doctest.h>

#include <algorithm>
#include <array>

#include "gffpin/error.hpp"
#include "gffpin/lattice.hpp"

using namespace gffpin;

namespace {

int interior_slots(const Box& box, SiteIndex x) {
  const auto nb = box.neighbors(x);
  return static_cast<int>(std::count_if(nb.begin(), nb.end(), [](SiteIndex y) { return y != kBoundary; }));
}

}  // namespace

TEST_SUITE("lattice") {
  TEST_CASE("square of side 3") {
    const Box box(2, 3);
    CHECK(box.volume() == 9);
    for (SiteIndex x = 0; x < 9; ++x) CHECK(box.neighbors(x).size() == 4);
  }

  TEST_CASE("single site has only boundary slots") {
    const Box box(2, 1);
    CHECK(box.volume() == 1);
    CHECK(box.boundary_slots(0) == 4);
    for (SiteIndex y : box.neighbors(0)) CHECK(y == kBoundary);
  }

  TEST_CASE("2x2x2 cube") {
    const Box box(3, 2);
    CHECK(box.volume() == 8);
    // every coordinate is 0 or 1: one step along each axis stays inside, the other leaves
    for (SiteIndex x = 0; x < 8; ++x) {
      CHECK(interior_slots(box, x) == 3);
      CHECK(box.boundary_slots(x) == 3);
    }
  }

  TEST_CASE("neighbor slot order") {
    const Box box(2, 4);
    const std::array<int, 2> c{1, 2};
    const SiteIndex x = box.encode(c);
    const auto nb = box.neighbors(x);
    auto at = [&](int i, int j) { return box.encode(std::array<int, 2>{i, j}); };
    CHECK(nb[0] == at(0, 2));
    CHECK(nb[1] == at(2, 2));
    CHECK(nb[2] == at(1, 1));
    CHECK(nb[3] == at(1, 3));
    CHECK(box.neighbors(at(0, 0))[0] == kBoundary);
    CHECK(box.neighbors(at(3, 3))[3] == kBoundary);
  }

  TEST_CASE("parity") {
    const Box box(2, 3);
    CHECK(box.parity(box.encode(std::array<int, 2>{0, 0})) == Parity::even);
    CHECK(box.parity(box.encode(std::array<int, 2>{1, 0})) == Parity::odd);
    CHECK(box.sites_of(Parity::even).size() == 5);
    CHECK(box.sites_of(Parity::odd).size() == 4);
  }

  TEST_CASE("checkerboard classes are independent sets") {
    for (int d : {1, 2, 3}) {
      const Box box(d, 5);
      for (Parity p : {Parity::even, Parity::odd})
        for (SiteIndex x : box.sites_of(p))
          for (SiteIndex y : box.neighbors(x))
            if (y != kBoundary) CHECK(box.parity(y) != p);
    }
  }

  TEST_CASE("adjacency is symmetric and encode inverts decode") {
    const Box box(3, 4);
    for (SiteIndex x = 0; x < box.volume(); ++x) {
      CHECK(box.encode(box.decode(x)) == x);
      for (SiteIndex y : box.neighbors(x)) {
        if (y == kBoundary) continue;
        const auto back = box.neighbors(y);
        CHECK(std::find(back.begin(), back.end(), x) != back.end());
      }
    }
  }

  TEST_CASE("center") {
    CHECK(Box(2, 5).decode(Box(2, 5).center()) == std::vector<int>{2, 2});
    CHECK(Box(3, 4).decode(Box(3, 4).center()) == std::vector<int>{2, 2, 2});
  }

  TEST_CASE("sub-box embedding") {
    const Box parent(2, 4), sub(2, 2);
    const std::array<int, 2> origin{2, 0};
    const auto map = embed_sub_box(parent, sub, origin);
    REQUIRE(map.size() == 4);
    CHECK(parent.decode(map[0]) == std::vector<int>{2, 0});
    CHECK(parent.decode(map[3]) == std::vector<int>{3, 1});
    const std::array<int, 2> outside{3, 0};
    CHECK_THROWS_AS(embed_sub_box(parent, sub, outside), ConfigError);
  }

  TEST_CASE("invalid boxes") {
    CHECK_THROWS_AS(Box(0, 3), ConfigError);
    CHECK_THROWS_AS(Box(2, 0), ConfigError);
  }
}
