// Bound-evaluator tests. The two pinned regression values were computed
// once with a 40-digit independent evaluation of the same expressions.

#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "scibdvp/theory.hpp"

using namespace scibdvp;
using namespace scibdvp::theory;

namespace {

BoundInputs base_inputs() {
  BoundInputs in;
  in.n = 65536.0;  // 2^16: log n = 16, loglog n = 4 (base 2)
  in.frames = 8.0;
  in.k = 1000.0;
  in.p = 0.4;
  in.delta = 0.01;
  in.lipschitz = 1.0;
  in.rho = 2.0;
  in.sigma_z = 0.0;
  return in;
}

}  // namespace

TEST_CASE("h(p) closed form") {
  REQUIRE(h_of_p(0.5, 8) == Approx(2.25).margin(1e-15));
  REQUIRE(h_of_p(0.0, 5) == 0.0);
  REQUIRE(h_of_p(0.3, 1) == Approx(0.3).margin(1e-15));
  REQUIRE_THROWS_AS(h_of_p(1.5, 2), std::invalid_argument);
}

TEST_CASE("noise-free bound pinned regression value") {
  const BoundInputs in = base_inputs();
  REQUIRE(bound_noisefree(in) ==
          Approx(11.551213699097882816).epsilon(1e-12));
}

TEST_CASE("noise-free bound term isolation and divergence") {
  BoundInputs in = base_inputs();
  in.delta = 0.0;
  in.lipschitz = 0.0;
  // only the middle term remains: symmetric about p = 0.5
  auto at = [&](double p) {
    BoundInputs c = in;
    c.p = p;
    return bound_noisefree(c);
  };
  for (double p : {0.1, 0.25, 0.4}) REQUIRE(at(p) == Approx(at(1.0 - p)).epsilon(1e-12));
  const double expected =
      2.0 * in.rho / std::sqrt(0.4 * 0.6) *
      std::pow(in.k * 64.0 * 4.0 / in.n, 0.25);
  REQUIRE(at(0.4) == Approx(expected).epsilon(1e-12));

  // divergence at the boundary
  REQUIRE(at(1e-9) > 1e3);
  REQUIRE(at(1.0 - 1e-9) > 1e3);
  REQUIRE_THROWS_AS(at(0.0), std::domain_error);
  REQUIRE_THROWS_AS(at(1.0), std::domain_error);
}

TEST_CASE("frame limit") {
  REQUIRE(frame_limit(65536.0, 1000.0) == 1);  // sqrt(1.024) -> 1
  REQUIRE(frame_limit(65536.0, 65536.0) == 0);
  // monotone: doubling k never increases B_max, growing n never decreases it
  int prev = frame_limit(65536.0, 1.0);
  for (double k = 2.0; k <= 4096.0; k *= 2.0) {
    const int cur = frame_limit(65536.0, k);
    REQUIRE(cur <= prev);
    prev = cur;
  }
  prev = frame_limit(16.0, 10.0);
  for (double n = 32.0; n <= 1 << 20; n *= 2.0) {
    const int cur = frame_limit(n, 10.0);
    REQUIRE(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("argmin of the noise-free bound") {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);

  SECTION("delta = 0 with L disabled: symmetric, p* = 0.5") {
    BoundInputs in = base_inputs();
    in.delta = 0.0;
    in.lipschitz = 0.0;
    const auto [p_star, val] = argmin_p(
        [&](double p) {
          BoundInputs c = in;
          c.p = p;
          return bound_noisefree(c);
        },
        grid);
    (void)val;
    REQUIRE(p_star == Approx(0.5).margin(1e-4));
  }

  SECTION("delta > 0 pulls the minimizer below 0.5") {
    for (double delta : {0.01, 0.05, 0.1}) {
      BoundInputs in = base_inputs();
      in.delta = delta;
      const auto [p_star, val] = argmin_p(
          [&](double p) {
            BoundInputs c = in;
            c.p = p;
            return bound_noisefree(c);
          },
          grid);
      (void)val;
      REQUIRE(p_star < 0.5);
    }
  }

  SECTION("larger delta gives smaller-or-equal p*") {
    double prev = 1.0;
    for (double delta : {0.01, 0.05, 0.1}) {
      BoundInputs in = base_inputs();
      in.delta = delta;
      const auto [p_star, val] = argmin_p(
          [&](double p) {
            BoundInputs c = in;
            c.p = p;
            return bound_noisefree(c);
          },
          grid);
      (void)val;
      REQUIRE(p_star <= prev + 1e-9);
      prev = p_star;
    }
  }

  SECTION("argument errors") {
    REQUIRE_THROWS_AS(argmin_p([](double p) { return p; }, {0.5}),
                      std::invalid_argument);
  }
}

TEST_CASE("noisy reconstruction bound") {
  BoundInputs in = base_inputs();
  in.sigma_z = 0.1;

  SECTION("term isolation at sigma_z = 0, delta = 0") {
    BoundInputs c = in;
    c.sigma_z = 0.0;
    c.delta = 0.0;
    const double expected =
        std::sqrt(1.0 / (0.4 * 0.6)) * c.rho / std::pow(16.0, 0.125);
    REQUIRE(bound_noisy_recon(c) == Approx(expected).epsilon(1e-12));
  }

  SECTION("argmin stays below 0.5 for noisy grids with delta > 0") {
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
    for (double delta : {0.01, 0.05}) {
      for (double sz : {0.05, 0.1, 0.2}) {
        BoundInputs c = in;
        c.delta = delta;
        c.sigma_z = sz;
        const auto [p_star, val] = argmin_p(
            [&](double p) {
              BoundInputs cc = c;
              cc.p = p;
              return bound_noisy_recon(cc);
            },
            grid);
        (void)val;
        REQUIRE(p_star < 0.5);
      }
    }
  }

  SECTION("pointwise increasing in sigma_z") {
    for (double p : {0.2, 0.5, 0.8}) {
      BoundInputs a = in, b = in;
      a.p = b.p = p;
      a.sigma_z = 0.05;
      b.sigma_z = 0.2;
      REQUIRE(bound_noisy_recon(b) > bound_noisy_recon(a));
    }
  }
}

TEST_CASE("mean-frame bound pinned value and monotonicity") {
  BoundInputs in = base_inputs();
  in.p = 1.0;
  in.delta = 0.0;
  in.sigma_z = 0.1;
  REQUIRE(bound_noisy_meanframe(in) ==
          Approx(0.43964817282049899071).epsilon(1e-12));

  SECTION("strictly decreasing over a 100-point grid") {
    for (double delta : {0.0, 0.01, 0.1})
      for (double sz : {0.05, 0.1, 0.2}) {
        BoundInputs c = base_inputs();
        c.delta = delta;
        c.sigma_z = sz;
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 100; ++i) {
          c.p = i / 100.0;
          const double v = bound_noisy_meanframe(c);
          REQUIRE(v < prev);
          prev = v;
        }
      }
  }

  SECTION("p = 0 is out of domain") {
    BoundInputs c = base_inputs();
    c.p = 0.0;
    REQUIRE_THROWS_AS(bound_noisy_meanframe(c), std::domain_error);
  }
}

TEST_CASE("mc_expected_energy exhaustive and sampled") {
  SECTION("u = [1,1], p = 0.5: brute force over the 4 outcomes") {
    // outcomes {0,1,1,4} each probability 1/4 -> mean 1.5
    const std::vector<double> u = {1.0, 1.0};
    double exact = 0.0;
    for (int mask = 0; mask < 4; ++mask) {
      double s = 0.0;
      if (mask & 1) s += u[0];
      if (mask & 2) s += u[1];
      exact += 0.25 * s * s;
    }
    REQUIRE(exact == Approx(1.5).margin(1e-15));
    REQUIRE(expected_energy(u, 0.5) == Approx(exact).margin(1e-15));
    const McEnergy mc = mc_expected_energy(u, 0.5, 100000, 3);
    REQUIRE(mc.analytic == Approx(exact).margin(1e-15));
    REQUIRE(std::fabs(mc.empirical - mc.analytic) <= 3.0 * mc.std_error);
  }

  SECTION("degenerate probabilities") {
    const std::vector<double> u = {0.2, 0.5, 0.7};
    const McEnergy one = mc_expected_energy(u, 1.0, 100, 1);
    REQUIRE(one.empirical == Approx((0.2 + 0.5 + 0.7) * (0.2 + 0.5 + 0.7)).margin(1e-12));
    REQUIRE(one.std_error == Approx(0.0).margin(1e-12));
    const McEnergy zero = mc_expected_energy(u, 0.0, 100, 1);
    REQUIRE(zero.empirical == 0.0);
    REQUIRE(zero.analytic == 0.0);
  }
}

TEST_CASE("mc_event_check") {
  VideoCube x(8, 8, 4);
  VideoCube xt(8, 8, 4);
  CounterRng rng(17, Stream::MonteCarlo, 55);
  for (double& v : x.data) v = rng.next_unit();
  for (double& v : xt.data) v = rng.next_unit();

  SECTION("huge epsilon makes the event certain") {
    REQUIRE(mc_event_check(x, xt, 0.5, 100.0, 200, 1) == 1.0);
  }
  SECTION("x = x_tilde holds trivially") {
    REQUIRE(mc_event_check(x, x, 0.5, 1e-9, 200, 1) == 1.0);
  }
  SECTION("hold frequency beats the Hoeffding prediction") {
    // eps1 chosen so the predicted failure probability is ~5%
    const double n = 256.0, B = 4.0;
    const double eps1 = std::sqrt(-std::log(0.05) * B * B / (2.0 * n));
    REQUIRE(hoeffding_e1_bound(n, B, eps1) == Approx(0.95).margin(1e-9));
    VideoCube a(16, 16, 4), b(16, 16, 4);
    for (double& v : a.data) v = rng.next_unit();
    for (double& v : b.data) v = rng.next_unit();
    const double freq = mc_event_check(a, b, 0.5, eps1, 10000, 9);
    REQUIRE(1.0 - freq <= 0.08);  // observed failure within binomial slack of 5%
  }
}
