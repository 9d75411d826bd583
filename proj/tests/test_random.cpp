#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tomoscope/random.hpp"

using namespace tomoscope;

TEST_CASE("Rng streams are reproducible and seed-sensitive", "[random]") {
  Rng a(42), b(42), c(43);
  bool differed = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform01();
    REQUIRE(x == b.uniform01());
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    differed = differed || x != c.uniform01();
  }
  REQUIRE(differed);
}

TEST_CASE("Rng gaussian moments", "[random]") {
  Rng rng(mix_seed(7, 7));
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("Rng below and permutation", "[random]") {
  Rng rng(mix_seed(7, 8));
  SECTION("below stays in range and covers values") {
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 1000; ++i) {
      ++seen.at(static_cast<std::size_t>(rng.below(5)));
    }
    for (int count : seen) {
      REQUIRE(count > 100);
    }
    REQUIRE_THROWS_AS(rng.below(0), std::invalid_argument);
  }
  SECTION("permutation is a permutation") {
    std::vector<std::size_t> p = rng.permutation(16);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 16; ++i) {
      REQUIRE(sorted[i] == i);
    }
  }
  SECTION("permutations vary across draws") {
    const std::vector<std::size_t> p1 = rng.permutation(16);
    const std::vector<std::size_t> p2 = rng.permutation(16);
    REQUIRE(p1 != p2);
  }
}

TEST_CASE("mix_seed separates nearby inputs", "[random]") {
  REQUIRE(mix_seed(1, 0, 0) != mix_seed(0, 1, 0));
  REQUIRE(mix_seed(0, 1, 0) != mix_seed(0, 0, 1));
  REQUIRE(mix_seed(5, 2, 3) == mix_seed(5, 2, 3));
}
