// Evaluators for the recovery bounds and the concentration identities
// behind them, plus the p-grid minimizer used for mask design.
//
// All logarithms here are base 2. The vanishing sequences that the bound
// statements leave implicit (alpha_n, beta_n, gamma_n, upsilon_n) default
// to their leading orders and can be overridden; the bounds are used for
// their shape and argmin behaviour, which the explicit terms carry.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "scibdvp/core.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/rng.hpp"

namespace scibdvp::theory {

struct BoundInputs {
  double n = 0.0;      // pixel count per frame
  double frames = 1.0; // B
  double k = 0.0;      // DVP parameter count
  double p = 0.5;      // mask Bernoulli parameter
  double delta = 0.0;  // representation error
  double lipschitz = 0.0;  // L, user-supplied (no estimator exists here)
  double rho = kRho;
  double sigma_z = 0.0;  // noise level in [0,1] units

  // Overridable vanishing sequences; defaults are the leading orders.
  std::optional<double> alpha_n;    // default 1/sqrt(log n)
  std::optional<double> beta_n;     // default 0
  std::optional<double> gamma_n;    // default 0
  std::optional<double> upsilon_n;  // default (log n)^(-1/8)
};

inline double log2_of(double x) { return std::log2(x); }

// h(p) = p + (B-1) p^2
inline double h_of_p(double p, double frames) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("h_of_p: p in [0,1]");
  return p + (frames - 1.0) * p * p;
}

namespace detail {
inline void check_n(const BoundInputs& in) {
  if (in.n < 4.0) throw std::domain_error("bound: n must be >= 4");
}
inline void check_p_open(const BoundInputs& in) {
  if (!(in.p > 0.0 && in.p < 1.0))
    throw std::domain_error("bound: diverges outside p in (0,1)");
}
}  // namespace detail

// Noise-free recovery bound:
//   sqrt(1 + Bp/(1-p)) * delta
// + 2 rho / sqrt(p(1-p)) * (k B^2 loglog n / n)^(1/4)
// + L/log n * sqrt(k/(nB)) * (B/sqrt(p(1-p)) + 1)
inline double bound_noisefree(const BoundInputs& in) {
  detail::check_n(in);
  detail::check_p_open(in);
  const double B = in.frames, p = in.p;
  const double ln = log2_of(in.n), lln = log2_of(ln);
  const double pq = p * (1.0 - p);
  const double t1 = std::sqrt(1.0 + B * p / (1.0 - p)) * in.delta;
  const double t2 =
      2.0 * in.rho / std::sqrt(pq) * std::pow(in.k * B * B * lln / in.n, 0.25);
  const double t3 = in.lipschitz / ln * std::sqrt(in.k / (in.n * B)) *
                    (B / std::sqrt(pq) + 1.0);
  return t1 + t2 + t3;
}

// Noisy-measurement recovery bound:
//   delta sqrt(1 + Bp/(1-p))
// + 3 sigma_z / (p(1-p)) * sqrt(1/log n)
// + (8/log n)^(1/4) sqrt(delta sigma_z / (p(1-p))) (1 + alpha_n)
// + sqrt(1/(p(1-p))) * rho/(log n)^(1/8) * (1 + beta_n)
// + gamma_n
inline double bound_noisy_recon(const BoundInputs& in) {
  detail::check_n(in);
  detail::check_p_open(in);
  const double B = in.frames, p = in.p;
  const double ln = log2_of(in.n);
  const double pq = p * (1.0 - p);
  const double an = in.alpha_n.value_or(1.0 / std::sqrt(ln));
  const double bn = in.beta_n.value_or(0.0);
  const double gn = in.gamma_n.value_or(0.0);
  const double t1 = in.delta * std::sqrt(1.0 + B * p / (1.0 - p));
  const double t2 = 3.0 * in.sigma_z / pq * std::sqrt(1.0 / ln);
  const double t3 = std::pow(8.0 / ln, 0.25) *
                    std::sqrt(in.delta * in.sigma_z / pq) * (1.0 + an);
  const double t4 =
      std::sqrt(1.0 / pq) * in.rho / std::pow(ln, 0.125) * (1.0 + bn);
  return t1 + t2 + t3 + t4 + gn;
}

// Mean-frame estimation bound (defined up to p = 1):
//   delta sqrt(1 + 1/(pB))
// + (1/p) sqrt(2 rho sigma_z / B) * (k loglog n h(p) / n)^(1/4)
// + upsilon_n / (p sqrt(B))
// + L/log n * sqrt(k/(nB))
inline double bound_noisy_meanframe(const BoundInputs& in) {
  detail::check_n(in);
  if (!(in.p > 0.0 && in.p <= 1.0))
    throw std::domain_error("bound_noisy_meanframe: p in (0,1]");
  const double B = in.frames, p = in.p;
  const double ln = log2_of(in.n), lln = log2_of(ln);
  const double un = in.upsilon_n.value_or(std::pow(ln, -0.125));
  const double t1 = in.delta * std::sqrt(1.0 + 1.0 / (p * B));
  const double t2 = (1.0 / p) * std::sqrt(2.0 * in.rho * in.sigma_z / B) *
                    std::pow(in.k * lln * h_of_p(p, B) / in.n, 0.25);
  const double t3 = un / (p * std::sqrt(B));
  const double t4 = in.lipschitz / ln * std::sqrt(in.k / (in.n * B));
  return t1 + t2 + t3 + t4;
}

// Largest frame count recoverable from one 2D measurement:
//   B_max = floor( sqrt( n / (k log n loglog n) ) ), 0 when the RHS < 1.
inline int frame_limit(double n, double k) {
  if (n < 4.0) throw std::invalid_argument("frame_limit: n must be >= 4");
  if (k < 1.0) throw std::invalid_argument("frame_limit: k must be >= 1");
  const double ln = log2_of(n), lln = log2_of(ln);
  return static_cast<int>(std::floor(std::sqrt(n / (k * ln * lln))));
}

// Grid search over p followed by golden-section refinement around the best
// grid cell; |p_star - argmin| <= 1e-4, ties broken toward smaller p.
inline std::pair<double, double> argmin_p(
    const std::function<double(double)>& bound_fn,
    const std::vector<double>& grid) {
  if (grid.size() < 3) throw std::invalid_argument("argmin_p: need >= 3 grid points");
  std::size_t best = 0;
  double best_val = bound_fn(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = bound_fn(grid[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = best > 0 ? grid[best - 1] : grid[best];
  double hi = best + 1 < grid.size() ? grid[best + 1] : grid[best];
  if (lo == hi) return {lo, best_val};

  constexpr double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = bound_fn(c), fd = bound_fn(d);
  while (b - a > 1e-5) {
    if (fc <= fd) {  // <= keeps ties drifting toward smaller p
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = bound_fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = bound_fn(d);
    }
  }
  const double p_star = 0.5 * (a + b);
  return {p_star, bound_fn(p_star)};
}

struct McEnergy {
  double empirical = 0.0;
  double analytic = 0.0;
  double std_error = 0.0;  // sample std / sqrt(trials)
};

// U_j = (sum_i D_i u_i)^2 for one mask column; its expectation is
//   E[U_j] = p^2 (sum_i u_i)^2 + (p - p^2) sum_i u_i^2.
inline double expected_energy(const std::vector<double>& u, double p) {
  double s = 0.0, s2 = 0.0;
  for (double v : u) {
    s += v;
    s2 += v * v;
  }
  return p * p * s * s + (p - p * p) * s2;
}

inline McEnergy mc_expected_energy(const std::vector<double>& u, double p,
                                   std::int64_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("mc_expected_energy: trials >= 1");
  CounterRng rng(seed, Stream::MonteCarlo);
  double acc = 0.0, acc2 = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    double s = 0.0;
    for (double v : u)
      if (rng.next_bernoulli(p)) s += v;
    const double uj = s * s;
    acc += uj;
    acc2 += uj * uj;
  }
  McEnergy out;
  out.empirical = acc / static_cast<double>(trials);
  out.analytic = expected_energy(u, p);
  const double var =
      std::max(0.0, acc2 / static_cast<double>(trials) - out.empirical * out.empirical);
  out.std_error = std::sqrt(var / static_cast<double>(trials));
  return out;
}

// Hoeffding prediction for the concentration event E1 holding:
//   P(E1) >= 1 - exp(-2 n eps1^2 / B^2).
inline double hoeffding_e1_bound(double n, double frames, double eps1) {
  return 1.0 - std::exp(-2.0 * n * eps1 * eps1 / (frames * frames));
}

// Samples masks and evaluates the event
//   (1/n)||H(x - xt)||^2 <= (p^2/n)||sum_i (x_i - xt_i)||^2
//                          + ((p-p^2)/n)||x - xt||^2 + B rho^2 eps1,
// returning the frequency with which it holds.
inline double mc_event_check(const VideoCube& x, const VideoCube& x_tilde,
                             double p, double eps1, std::int64_t trials,
                             std::uint64_t seed) {
  if (!x.same_shape(x_tilde))
    throw std::invalid_argument("mc_event_check: shape mismatch");
  const std::size_t n = x.pixels();
  const int B = x.frames;

  std::vector<double> diff(x.data.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = x.data[i] - x_tilde.data[i];

  double sum_sq = 0.0;  // ||x - xt||^2
  for (double v : diff) sum_sq += v * v;
  std::vector<double> col_sum(n, 0.0);  // per-pixel sum over frames
  for (int f = 0; f < B; ++f)
    for (std::size_t j = 0; j < n; ++j) col_sum[j] += diff[f * n + j];
  double sum_col_sq = 0.0;
  for (double v : col_sum) sum_col_sq += v * v;

  const double rhs = (p * p) * sum_col_sq / n + (p - p * p) * sum_sq / n +
                     B * kRho * kRho * eps1;

  CounterRng rng(seed, Stream::MonteCarlo, 1);
  std::int64_t holds = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    double hu = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int f = 0; f < B; ++f)
        if (rng.next_bernoulli(p)) s += diff[f * n + j];
      hu += s * s;
    }
    if (hu / n <= rhs) ++holds;
  }
  return static_cast<double>(holds) / static_cast<double>(trials);
}

}  // namespace scibdvp::theory
