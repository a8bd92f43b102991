#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "wcn/coding.hpp"

using namespace wcn;

TEST_CASE("layer rates accumulate the interference-limited increments", "[coding]") {
  // Two layers, powers (2, 8), thresholds (0.1, 0.5).  Layer 1 sees layer 2
  // as noise: ln(1 + 2*0.1 / (1 + 0.1*8)) = ln(10/9).  Layer 2 then adds
  // ln(1 + 8*0.5) on a clean floor.
  std::vector<double> r = layer_rates({2.0, 8.0}, {0.1, 0.5});
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == Catch::Approx(std::log(10.0 / 9.0)).epsilon(1e-12));
  CHECK(r[2] == Catch::Approx(std::log(10.0 / 9.0) + std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("layer rates honor the log base", "[coding]") {
  std::vector<double> nat = layer_rates({2.0, 8.0}, {0.1, 0.5});
  std::vector<double> bits = layer_rates({2.0, 8.0}, {0.1, 0.5}, 2.0);
  for (std::size_t i = 0; i < nat.size(); ++i)
    CHECK(bits[i] == Catch::Approx(nat[i] / std::log(2.0)).margin(1e-12));
}

TEST_CASE("layer rates edge cases", "[coding]") {
  CHECK(layer_rates({}, {}) == std::vector<double>{0.0});
  std::vector<double> one = layer_rates({4.0}, {0.5});
  REQUIRE(one.size() == 2);
  CHECK(one[1] == Catch::Approx(std::log(3.0)).epsilon(1e-12));
  // Silent level: no power, no rate.
  std::vector<double> silent = layer_rates({0.0, 0.0}, {0.1, 0.5});
  CHECK(silent[1] == 0.0);
  CHECK(silent[2] == 0.0);
  CHECK_THROWS_AS(layer_rates({1.0}, {0.1, 0.5}), std::invalid_argument);
}

TEST_CASE("cumulative layer rates never decrease", "[coding]") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> powers(3), thr(3);
    double g = 0.0;
    for (int l = 0; l < 3; ++l) {
      powers[static_cast<std::size_t>(l)] = u(rng);
      g += 0.01 + u(rng);
      thr[static_cast<std::size_t>(l)] = g;
    }
    std::vector<double> r = layer_rates(powers, thr);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] >= r[i - 1]);
  }
}

namespace {
// Cumulative rate table of a four-state link with one active resource level.
const std::vector<std::vector<double>> kTable = {
    {0.0, 0.0, 0.0, 0.0}, {0.0, 12.1, 20.6, 48.3}};
}  // namespace

TEST_CASE("realized rate reads the state and level entry", "[coding]") {
  CHECK(realized_rate(0, 1, kTable) == 0.0);
  CHECK(realized_rate(2, 0, kTable) == 0.0);
  CHECK(realized_rate(1, 1, kTable) == Catch::Approx(12.1));
  CHECK(realized_rate(3, 1, kTable) == Catch::Approx(48.3));
}

TEST_CASE("outage rate is all or nothing at the design state", "[coding]") {
  const int l_star = 2;
  CHECK(outage_rate(0, l_star, kTable, 1) == 0.0);
  CHECK(outage_rate(1, l_star, kTable, 1) == 0.0);
  CHECK(outage_rate(2, l_star, kTable, 1) == Catch::Approx(20.6));
  CHECK(outage_rate(3, l_star, kTable, 1) == Catch::Approx(20.6));
  CHECK(outage_rate(3, l_star, kTable, 0) == 0.0);
}

TEST_CASE("partitions telescope the sorted realized rates", "[coding]") {
  PartitionStructure p =
      build_partitions({{7, 12.1}, {3, 0.0}, {9, 20.6}});
  REQUIRE(p.size() == 3);
  CHECK(p.order == std::vector<int>{3, 7, 9});
  CHECK(p.rate[0] == Catch::Approx(0.0));
  CHECK(p.rate[1] == Catch::Approx(12.1));
  CHECK(p.rate[2] == Catch::Approx(20.6));
  CHECK(p.width[0] == Catch::Approx(0.0));
  CHECK(p.width[1] == Catch::Approx(12.1));
  CHECK(p.width[2] == Catch::Approx(8.5));
  CHECK(p.best_rate() == Catch::Approx(20.6));
}

TEST_CASE("partition ties break by id and carry zero extra width", "[coding]") {
  PartitionStructure p = build_partitions({{5, 3.0}, {2, 3.0}});
  CHECK(p.order == std::vector<int>{2, 5});
  CHECK(p.width[0] == Catch::Approx(3.0));
  CHECK(p.width[1] == Catch::Approx(0.0));
}

TEST_CASE("partition degenerate shapes", "[coding]") {
  PartitionStructure empty = build_partitions({});
  CHECK(empty.size() == 0);
  CHECK(empty.best_rate() == 0.0);

  PartitionStructure one = build_partitions({{4, 7.5}});
  REQUIRE(one.size() == 1);
  CHECK(one.order[0] == 4);
  CHECK(one.width[0] == Catch::Approx(7.5));

  PartitionStructure dark = build_partitions({{1, 0.0}, {2, 0.0}});
  CHECK(dark.best_rate() == 0.0);
  CHECK(dark.width[0] == 0.0);
  CHECK(dark.width[1] == 0.0);
}

TEST_CASE("partition invariants hold on random receiver sets", "[coding]") {
  std::mt19937_64 rng(4096);
  std::uniform_int_distribution<int> nrx(1, 8);
  std::uniform_int_distribution<int> state(0, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::pair<int, double>> rx;
    int n = nrx(rng);
    for (int i = 0; i < n; ++i)
      rx.emplace_back(i, kTable[1][static_cast<std::size_t>(state(rng))]);
    PartitionStructure p = build_partitions(rx);
    REQUIRE(p.size() == static_cast<std::size_t>(n));
    double prefix = 0.0;
    double top = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i > 0) CHECK(p.rate[i] >= p.rate[i - 1]);
      CHECK(p.width[i] >= 0.0);
      prefix += p.width[i];
      // A receiver at position i decodes partitions 1..i+1, whose widths
      // must telescope back to exactly its own realized rate.
      CHECK(prefix == Catch::Approx(p.rate[i]).margin(1e-12));
      top = std::max(top, p.rate[i]);
    }
    CHECK(p.best_rate() == Catch::Approx(top).margin(1e-12));
  }
}
