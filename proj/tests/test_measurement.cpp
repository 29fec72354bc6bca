// Forward-model tests, including the dense-matrix oracle: H materialized
// explicitly as [D_1,...,D_B] and compared entry by entry on every small
// instance.

#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "scibdvp/measurement.hpp"
#include "scibdvp/rng.hpp"

using namespace scibdvp;

namespace {

// Dense n x nB sensing matrix built directly from the mask bits.
struct DenseOracle {
  std::size_t n = 0;
  int B = 0;
  std::vector<double> h;  // row-major n x (n*B)

  explicit DenseOracle(const MaskCube& m) : n(m.pixels()), B(m.frames) {
    h.assign(n * n * B, 0.0);
    for (int f = 0; f < B; ++f) {
      const std::uint8_t* bits = m.frame(f);
      for (std::size_t j = 0; j < n; ++j)
        h[j * (n * B) + f * n + j] = bits[j];
    }
  }

  std::vector<double> matvec(const std::vector<double>& x) const {
    std::vector<double> y(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n * B; ++c) y[r] += h[r * (n * B) + c] * x[c];
    return y;
  }

  std::vector<double> rmatvec(const std::vector<double>& y) const {
    std::vector<double> x(n * B, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n * B; ++c) x[c] += h[r * (n * B) + c] * y[r];
    return x;
  }

  std::vector<double> gram_diag() const {
    std::vector<double> d(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n * B; ++c)
        d[r] += h[r * (n * B) + c] * h[r * (n * B) + c];
    return d;
  }
};

VideoCube random_cube(int n1, int n2, int B, std::uint64_t seed) {
  VideoCube x(n1, n2, B);
  CounterRng rng(seed, Stream::MonteCarlo, 99);
  for (double& v : x.data) v = rng.next_unit();
  return x;
}

}  // namespace

TEST_CASE("gen_mask degenerate probabilities") {
  const MaskCube ones = gen_mask(2, 2, 2, 1.0, 7);
  for (auto b : ones.bits) REQUIRE(b == 1);
  const MaskCube zeros = gen_mask(2, 2, 2, 0.0, 7);
  for (auto b : zeros.bits) REQUIRE(b == 0);
}

TEST_CASE("gen_mask is deterministic and density concentrates") {
  const MaskCube a = gen_mask(64, 64, 8, 0.5, 1);
  const MaskCube b = gen_mask(64, 64, 8, 0.5, 1);
  REQUIRE(a.bits == b.bits);
  double density = 0.0;
  for (auto bit : a.bits) density += bit;
  density /= static_cast<double>(a.bits.size());
  // binomial: 0.5 +- 3 sqrt(0.25/32768)
  REQUIRE(std::fabs(density - 0.5) <= 3.0 * std::sqrt(0.25 / 32768.0));
}

TEST_CASE("gen_mask argument errors") {
  REQUIRE_THROWS_AS(gen_mask(2, 2, 2, -0.1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(gen_mask(2, 2, 2, 1.5, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(gen_mask(0, 2, 2, 0.5, 1), std::invalid_argument);
}

TEST_CASE("forward on trivial masks") {
  // B=1 all-ones: y = x1
  const SensingOperator op1 = make_operator(gen_mask(3, 3, 1, 1.0, 1));
  const VideoCube x1 = random_cube(3, 3, 1, 5);
  const Measurement y1 = forward(op1, x1);
  for (std::size_t j = 0; j < y1.size(); ++j) REQUIRE(y1.data[j] == x1.data[j]);
  REQUIRE(y1.sigma == 0.0);

  // n=1, B=2, C=[1,1], x=[0.2,0.3] -> 0.5
  const SensingOperator op2 = make_operator(gen_mask(1, 1, 2, 1.0, 1));
  VideoCube x2(1, 1, 2);
  x2.data = {0.2, 0.3};
  REQUIRE(forward(op2, x2).data[0] == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("forward/adjoint/gram match the dense oracle on all small instances") {
  for (int n1 = 1; n1 <= 4; ++n1)
    for (int n2 = 1; n2 <= 4; ++n2)
      for (int B = 1; B <= 3; ++B)
        for (double p : {0.3, 0.7}) {
          const MaskCube mask = gen_mask(n1, n2, B, p, 11 + n1 + 10 * n2 + 100 * B);
          const SensingOperator op = make_operator(mask);
          const DenseOracle oracle(mask);
          const VideoCube x = random_cube(n1, n2, B, 3);

          const Measurement y = forward(op, x);
          const auto y_ref = oracle.matvec(x.data);
          for (std::size_t j = 0; j < y.size(); ++j)
            REQUIRE(y.data[j] == Approx(y_ref[j]).margin(1e-12));

          const VideoCube xt = adjoint(op, y);
          const auto xt_ref = oracle.rmatvec(y.data);
          for (std::size_t i = 0; i < xt.data.size(); ++i)
            REQUIRE(xt.data[i] == Approx(xt_ref[i]).margin(1e-12));

          const auto gd = oracle.gram_diag();
          for (std::size_t j = 0; j < gd.size(); ++j)
            REQUIRE(op.gram_diag[j] == gd[j]);
        }
}

TEST_CASE("adjoint identity <Hx,y> = <x,H^T y>") {
  const SensingOperator op = make_operator(gen_mask(3, 3, 2, 0.5, 21));
  const VideoCube x = random_cube(3, 3, 2, 4);
  Measurement y(3, 3);
  CounterRng rng(6, Stream::MonteCarlo, 1);
  for (double& v : y.data) v = rng.next_unit();

  const Measurement hx = forward(op, x);
  const VideoCube hty = adjoint(op, y);
  const double lhs = dot(hx.data, y.data);
  const double rhs = dot(x.data, hty.data);
  REQUIRE(std::fabs(lhs - rhs) <=
          1e-10 * l2_norm(x.data) * l2_norm(y.data) + 1e-300);
}

TEST_CASE("gram_diag counts active frames per pixel") {
  const MaskCube m = gen_mask(4, 4, 3, 0.5, 9);
  const SensingOperator op = make_operator(m);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      int count = 0;
      for (int f = 0; f < 3; ++f) count += m.bit(f, r, c);
      REQUIRE(op.gram_diag[r * 4 + c] == count);
    }
}

TEST_CASE("gram_apply_inverse conventions") {
  // B=1 all ones: identity
  const SensingOperator op1 = make_operator(gen_mask(2, 2, 1, 1.0, 1));
  Measurement r(2, 2, 0.6);
  const Measurement out1 = gram_apply_inverse(op1, r);
  for (double v : out1.data) REQUIRE(v == 0.6);

  // pixel covered by 3 frames -> r/3; zero coverage -> 0
  MaskCube m;
  m.n1 = 1;
  m.n2 = 2;
  m.frames = 3;
  m.bits = {1, 0, 1, 0, 1, 0};  // pixel 0 covered 3x, pixel 1 never
  const SensingOperator op2 = make_operator(m);
  Measurement r2(1, 2);
  r2.data = {0.6, 0.9};
  const Measurement out2 = gram_apply_inverse(op2, r2);
  REQUIRE(out2.data[0] == Approx(0.2).epsilon(1e-15));
  REQUIRE(out2.data[1] == 0.0);
}

TEST_CASE("add_noise basics") {
  Measurement y(64, 64);
  CounterRng rng(2, Stream::MonteCarlo, 2);
  for (double& v : y.data) v = rng.next_unit();

  const Measurement same = add_noise(y, 0.0, 5);
  REQUIRE(same.data == y.data);

  const Measurement a = add_noise(y, 25.0, 5);
  const Measurement b = add_noise(y, 25.0, 5);
  REQUIRE(a.data == b.data);  // determinism
  REQUIRE(a.sigma == 25.0);

  // sample std of the perturbation within 5% of 25/255 (chi-square interval)
  double sq = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double d = a.data[j] - y.data[j];
    sq += d * d;
  }
  const double sd = std::sqrt(sq / static_cast<double>(y.size()));
  REQUIRE(sd == Approx(25.0 / 255.0).epsilon(0.05));

  REQUIRE_THROWS_AS(add_noise(y, -1.0, 5), std::invalid_argument);
}

TEST_CASE("restrict_region basics and dense oracle") {
  const MaskCube mask = gen_mask(6, 6, 2, 0.5, 31);
  const SensingOperator op = make_operator(mask);
  const VideoCube x = random_cube(6, 6, 2, 13);
  const Measurement y = forward(op, x);

  SECTION("full-frame region is the identity") {
    const auto [sub, ys] = restrict_region(op, y, {0, 0, 6, 6});
    REQUIRE(sub.mask.bits == op.mask.bits);
    REQUIRE(ys.data == y.data);
  }

  SECTION("disjoint tiling reassembles the full forward") {
    Measurement reassembled(6, 6);
    for (int r = 0; r < 6; r += 3)
      for (int c = 0; c < 6; c += 3) {
        const Region rg{r, c, 3, 3};
        const auto [sub, ys] = restrict_region(op, y, rg);
        const Measurement ysub = forward(sub, x.crop(rg));
        for (int rr = 0; rr < 3; ++rr)
          for (int cc = 0; cc < 3; ++cc)
            reassembled.at(r + rr, c + cc) = ysub.at(rr, cc);
      }
    for (std::size_t j = 0; j < y.size(); ++j)
      REQUIRE(reassembled.data[j] == Approx(y.data[j]).margin(1e-12));
  }

  SECTION("restriction matches dense-oracle row/column selection") {
    const Region rg{1, 2, 3, 3};
    const auto [sub, ys] = restrict_region(op, y, rg);
    const DenseOracle oracle(sub.mask);
    const VideoCube xs = x.crop(rg);
    const Measurement fsub = forward(sub, xs);
    const auto ref = oracle.matvec(xs.data);
    for (std::size_t j = 0; j < fsub.size(); ++j)
      REQUIRE(fsub.data[j] == Approx(ref[j]).margin(1e-12));
    // the slice carries the co-located measurements
    for (int rr = 0; rr < 3; ++rr)
      for (int cc = 0; cc < 3; ++cc)
        REQUIRE(ys.at(rr, cc) == y.at(1 + rr, 2 + cc));
  }

  SECTION("out-of-bounds region errors") {
    REQUIRE_THROWS_AS(restrict_region(op, y, {4, 4, 3, 3}), std::invalid_argument);
    REQUIRE_THROWS_AS(restrict_region(op, y, {-1, 0, 2, 2}), std::invalid_argument);
  }
}

TEST_CASE("operator norm bound ||Hu||^2 <= B ||u||^2") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const SensingOperator op = make_operator(gen_mask(5, 5, 3, 0.6, seed));
    const VideoCube u = random_cube(5, 5, 3, seed + 100);
    const Measurement hu = forward(op, u);
    REQUIRE(dot(hu.data, hu.data) <= 3.0 * dot(u.data, u.data) + 1e-12);
  }
}

TEST_CASE("monte-carlo mean of U_j matches the expectation identity") {
  // U_j = (sum_i D_ij u_ij)^2, E[U_j] = p^2 (sum u)^2 + (p-p^2) sum u^2
  const double p = 0.4;
  const std::vector<double> u = {0.3, 0.8, 0.5, 0.1};
  const double analytic =
      p * p * (0.3 + 0.8 + 0.5 + 0.1) * (0.3 + 0.8 + 0.5 + 0.1) +
      (p - p * p) * (0.09 + 0.64 + 0.25 + 0.01);

  CounterRng rng(77, Stream::MonteCarlo, 5);
  const int trials = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    double s = 0.0;
    for (double v : u)
      if (rng.next_bernoulli(p)) s += v;
    acc += s * s;
    acc2 += s * s * s * s;
  }
  const double mean = acc / trials;
  const double se = std::sqrt((acc2 / trials - mean * mean) / trials);
  REQUIRE(std::fabs(mean - analytic) <= 3.0 * se);
}
