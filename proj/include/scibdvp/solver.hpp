// Outer recovery loop: projected gradient descent alternating a data-fit
// descent step (GAP for noise-free measurements, plain GD for noisy ones)
// with the bagged video-prior projection, joined by a skip connection
//   x_t = alpha * x_G + (1 - alpha) * x_P.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "scibdvp/bdvp.hpp"
#include "scibdvp/core.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/metrics.hpp"

namespace scibdvp {

enum class DescentMode { GAP, GD, E2E };

inline const char* mode_name(DescentMode m) {
  switch (m) {
    case DescentMode::GAP: return "gap";
    case DescentMode::GD: return "gd";
    case DescentMode::E2E: return "e2e";
  }
  return "?";
}

struct SolverConfig {
  DescentMode mode = DescentMode::GAP;
  double mu = 1.0;     // step size: 1.0 for GAP, 0.1 for GD
  double alpha = 0.5;   // skip weight in [0,1]
  int outer_iters = 0;  // T; 0 = let the harness profile resolve it
  BaggedConfig bagged;
  std::uint64_t seed = 0;
  bool raw_init = false;  // x0 = H^T y without coverage normalization

  void validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("SolverConfig: mu > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("SolverConfig: alpha in [0,1]");
    if (outer_iters < 1) throw std::invalid_argument("SolverConfig: T >= 1");
  }
};

struct TraceRow {
  int iter = 0;
  double residual = 0.0;
  double psnr = 0.0;  // vs ground truth when available, else NaN
  double ssim = 0.0;
  double psnr_vs_meanframe = 0.0;  // psnr(x_hat, repeated mean frame of gt)
  double seconds = 0.0;            // wall time of the iteration
};

struct RunTrace {
  std::vector<TraceRow> rows;
  bool has_ground_truth = false;
};

// GAP step: x + mu H^T (H H^T)^-1 (y - Hx). With mu = 1 this projects onto
// the data hyperplane on every covered pixel.
inline VideoCube descent_gap(const VideoCube& x, const Measurement& y,
                             const SensingOperator& op, double mu) {
  Measurement r = forward(op, x);
  for (std::size_t j = 0; j < r.size(); ++j) r.data[j] = y.data[j] - r.data[j];
  const Measurement scaled = gram_apply_inverse(op, r);
  VideoCube out = x;
  for (int f = 0; f < out.frames; ++f) {
    const std::uint8_t* c = op.mask.frame(f);
    double* dst = out.frame(f);
    for (std::size_t j = 0; j < scaled.size(); ++j)
      if (c[j]) dst[j] += mu * scaled.data[j];
  }
  return out;
}

// Plain gradient step: x + mu H^T (y - Hx).
inline VideoCube descent_gd(const VideoCube& x, const Measurement& y,
                            const SensingOperator& op, double mu) {
  Measurement r = forward(op, x);
  for (std::size_t j = 0; j < r.size(); ++j) r.data[j] = y.data[j] - r.data[j];
  VideoCube out = x;
  for (int f = 0; f < out.frames; ++f) {
    const std::uint8_t* c = op.mask.frame(f);
    double* dst = out.frame(f);
    for (std::size_t j = 0; j < r.size(); ++j)
      if (c[j]) dst[j] += mu * r.data[j];
  }
  return out;
}

inline VideoCube skip_combine(const VideoCube& x_g, const VideoCube& x_p,
                              double alpha) {
  if (!x_g.same_shape(x_p))
    throw std::invalid_argument("skip_combine: shape mismatch");
  VideoCube out = x_g;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = alpha * x_g.data[i] + (1.0 - alpha) * x_p.data[i];
  return out;
}

struct MeanFrameReport {
  double psnr_x_xhat = 0.0;       // psnr(x, x_hat)
  double psnr_x_meanframe = 0.0;  // psnr(x, repeated mean frame of x)
  double psnr_xhat_meanframe = 0.0;
};

// The three quantities of the mean-frame decomposition: how far the
// reconstruction is from the truth, how far the truth is from its own
// repeated mean frame, and how far the reconstruction drifted toward it.
inline MeanFrameReport mean_frame_analysis(const VideoCube& x,
                                           const VideoCube& x_hat) {
  if (!x.same_shape(x_hat))
    throw std::invalid_argument("mean_frame_analysis: shape mismatch");
  const VideoCube xbar = mean_frame_repeated(x);
  MeanFrameReport rep;
  rep.psnr_x_xhat = psnr(x, x_hat);
  rep.psnr_x_meanframe = psnr(x, xbar);
  rep.psnr_xhat_meanframe = psnr(x_hat, xbar);
  return rep;
}

// Initialization: H^T y with per-pixel coverage normalization (keeps x0 in
// [0,1] for any B); the raw form is available behind cfg.raw_init.
inline VideoCube initial_estimate(const Measurement& y, const SensingOperator& op,
                                  bool raw) {
  VideoCube x0 = adjoint(op, y);
  if (raw) return x0;
  for (int f = 0; f < x0.frames; ++f) {
    double* dst = x0.frame(f);
    for (std::size_t j = 0; j < y.size(); ++j)
      dst[j] /= std::max(op.gram_diag[j], 1.0);
  }
  return x0;
}

inline void check_finite_iterate(const VideoCube& x, int iter) {
  if (!x.all_finite())
    throw std::runtime_error("recover: non-finite iterate at outer iteration " +
                             std::to_string(iter));
}

// Algorithm: x0 = normalized H^T y; per outer iteration descent ->
// bagged projection -> skip connection. Ground truth, when supplied, only
// feeds the trace metrics (clamped copies; the loop never clamps).
inline std::pair<VideoCube, RunTrace> recover(const Measurement& y,
                                              const SensingOperator& op,
                                              const SolverConfig& cfg,
                                              const VideoCube* ground_truth = nullptr) {
  cfg.validate();
  if (cfg.mode == DescentMode::GAP && y.sigma > 0.0)
    std::fprintf(stderr,
                 "warning: GAP descent on noisy measurements (sigma=%g); the "
                 "data hyperplane no longer contains the signal\n",
                 y.sigma);

  RunTrace trace;
  trace.has_ground_truth = ground_truth != nullptr;
  VideoCube meanframe_gt;
  if (ground_truth) meanframe_gt = mean_frame_repeated(*ground_truth);

  BdvpState state;
  VideoCube x = initial_estimate(y, op, cfg.raw_init);
  check_finite_iterate(x, 0);

  for (int t = 1; t <= cfg.outer_iters; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    VideoCube x_g = cfg.mode == DescentMode::GD ? descent_gd(x, y, op, cfg.mu)
                                                : descent_gap(x, y, op, cfg.mu);
    check_finite_iterate(x_g, t);
    if (cfg.alpha == 1.0) {
      // skip weight 1 ignores the projection entirely
      x = std::move(x_g);
    } else {
      VideoCube x_p = bdvp_project(x_g, y, op, cfg.bagged,
                                   static_cast<std::uint64_t>(t),
                                   cfg.bagged.warm_start ? &state : nullptr);
      check_finite_iterate(x_p, t);
      x = skip_combine(x_g, x_p, cfg.alpha);
    }
    check_finite_iterate(x, t);

    TraceRow row;
    row.iter = t;
    row.residual = residual_norm(op, y, x);
    if (ground_truth) {
      const VideoCube clamped = clamped01(x);
      row.psnr = psnr(*ground_truth, clamped);
      row.ssim = ssim(*ground_truth, clamped);
      row.psnr_vs_meanframe = psnr(clamped, meanframe_gt);
    } else {
      row.psnr = row.ssim = row.psnr_vs_meanframe =
          std::numeric_limits<double>::quiet_NaN();
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.rows.push_back(row);
  }
  return {std::move(x), std::move(trace)};
}

// End-to-end variant: no outer loop; per scale/region DVPs fit the
// measurement loss only, then bag.
inline VideoCube recover_e2e(const Measurement& y, const SensingOperator& op,
                             const SolverConfig& cfg) {
  cfg.validate();
  return bdvp_e2e(y, op, cfg.bagged, 0);
}

}  // namespace scibdvp
