#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "scibdvp/rng.hpp"

using namespace scibdvp;

TEST_CASE("counter rng is deterministic per key") {
  CounterRng a(42, Stream::Mask, 7);
  CounterRng b(42, Stream::Mask, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different purposes or instances differ") {
  CounterRng a(42, Stream::Mask, 0);
  CounterRng b(42, Stream::Noise, 0);
  CounterRng c(42, Stream::Mask, 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    if (va == b.next_u64()) ++same_ab;
    if (va == c.next_u64()) ++same_ac;
  }
  REQUIRE(same_ab == 0);
  REQUIRE(same_ac == 0);
}

TEST_CASE("unit draws stay in range") {
  CounterRng r(1, Stream::MonteCarlo);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = r.next_unit_pos();
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("gaussian draws have sane moments") {
  CounterRng r(7, Stream::Noise);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.next_gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::fabs(mean) < 0.01);
  REQUIRE(var == Approx(1.0).margin(0.02));
}
