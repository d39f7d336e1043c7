#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <lyaprnn/rng.hpp>

using namespace lyaprnn;

TEST_CASE("splitmix64 matches the reference sequence for state 0") {
  // First draw of the canonical SplitMix64 generator from initial states
  // 0, 1 and 2 (reference-implementation values).
  REQUIRE(splitmix64(0) == 0xE220A8397B1DCDAFull);
  REQUIRE(splitmix64(1) == 0x910A2DEC89025CC1ull);
  REQUIRE(splitmix64(2) == 0x975835DE1C9756CEull);
}

TEST_CASE("engine seeding follows the documented construction") {
  Rng rng({123, 456});
  std::mt19937_64 engine(splitmix64(splitmix64(123) + 456));
  REQUIRE(rng.uniform01() ==
          static_cast<double>(engine() >> 11) * 0x1.0p-53);
}

TEST_CASE("identical seed and stream reproduce identical draws") {
  Rng a({42, 7});
  Rng b({42, 7});
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.normal() == b.normal());
  }
}

TEST_CASE("different streams decorrelate") {
  Rng a({42, 0});
  Rng b({42, 1});
  int distinct = 0;
  for (int i = 0; i < 16; ++i) {
    if (a.uniform01() != b.uniform01()) ++distinct;
  }
  REQUIRE(distinct == 16);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  Rng rng({3, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("uniform respects its bounds") {
  Rng rng({3, 1});
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-0.08, 0.08);
    REQUIRE(u >= -0.08);
    REQUIRE(u < 0.08);
  }
}

TEST_CASE("normal consumes exactly two uniform draws per sample") {
  Rng a({9, 2});
  Rng b({9, 2});
  (void)a.normal();  // two draws
  (void)b.uniform01();
  (void)b.uniform01();
  REQUIRE(a.uniform01() == b.uniform01());
}

TEST_CASE("normal has unit variance and zero mean at the 3-SE level") {
  Rng rng({2024, 0});
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // SE(mean) = 1/sqrt(n); SE(var) = sqrt(2/n) for a Gaussian.
  REQUIRE(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  REQUIRE(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("scaled normal has the requested variance") {
  Rng rng({2024, 5});
  const int n = 1000000;
  const double sigma2 = 0.6;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(sigma2);
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(var - sigma2) < 3.0 * sigma2 * std::sqrt(2.0 / n));
}
