// Deterministic synthetic video generators: desk-scale stand-ins for the
// benchmark videos, smooth in space and coherent in time.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "scibdvp/core.hpp"
#include "scibdvp/rng.hpp"

namespace scibdvp {

enum class SyntheticKind { MovingBlob, ShiftingGradient, BouncingRects };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::MovingBlob;
  int n1 = 64;
  int n2 = 64;
  int frames = 8;
  double amplitude = 2.0;  // motion in pixels per frame
  std::uint64_t seed = 0;
};

inline SyntheticKind synthetic_kind_from_name(const std::string& name) {
  if (name == "moving_blob") return SyntheticKind::MovingBlob;
  if (name == "shifting_gradient") return SyntheticKind::ShiftingGradient;
  if (name == "bouncing_rects") return SyntheticKind::BouncingRects;
  throw std::invalid_argument("unknown synthetic kind: " + name);
}

inline const char* synthetic_kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::MovingBlob: return "moving_blob";
    case SyntheticKind::ShiftingGradient: return "shifting_gradient";
    case SyntheticKind::BouncingRects: return "bouncing_rects";
  }
  return "?";
}

namespace detail {

// Triangle wave with period 2, range [0,1]; continuous everywhere.
inline double triangle01(double t) {
  t = std::fmod(std::fabs(t), 2.0);
  return t <= 1.0 ? t : 2.0 - t;
}

inline VideoCube gen_moving_blob(const SyntheticSpec& spec, CounterRng& rng) {
  VideoCube x(spec.n1, spec.n2, spec.frames);
  const double cy0 = spec.n1 * (0.3 + 0.4 * rng.next_unit());
  const double cx0 = spec.n2 * (0.3 + 0.4 * rng.next_unit());
  const double dir = 2.0 * 3.14159265358979323846 * rng.next_unit();
  const double vy = spec.amplitude * std::sin(dir);
  const double vx = spec.amplitude * std::cos(dir);
  const double sig = 0.14 * std::min(spec.n1, spec.n2);
  for (int f = 0; f < spec.frames; ++f) {
    const double cy = cy0 + f * vy, cx = cx0 + f * vx;
    for (int r = 0; r < spec.n1; ++r)
      for (int c = 0; c < spec.n2; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        x.at(f, r, c) = 0.1 + 0.8 * std::exp(-d2 / (2.0 * sig * sig));
      }
  }
  return x;
}

inline VideoCube gen_shifting_gradient(const SyntheticSpec& spec, CounterRng& rng) {
  VideoCube x(spec.n1, spec.n2, spec.frames);
  const double ang = 2.0 * 3.14159265358979323846 * rng.next_unit();
  const double ky = std::sin(ang), kx = std::cos(ang);
  const double period = 1.2 * std::min(spec.n1, spec.n2);
  for (int f = 0; f < spec.frames; ++f) {
    const double shift = f * spec.amplitude;
    for (int r = 0; r < spec.n1; ++r)
      for (int c = 0; c < spec.n2; ++c) {
        const double t = (r * ky + c * kx + shift) / period;
        x.at(f, r, c) = 0.08 + 0.84 * triangle01(2.0 * t);
      }
  }
  return x;
}

inline VideoCube gen_bouncing_rects(const SyntheticSpec& spec, CounterRng& rng) {
  VideoCube x(spec.n1, spec.n2, spec.frames);
  constexpr int kRects = 3;
  struct Rect {
    double cy, cx, vy, vx, hh, hw, val;
  };
  Rect rects[kRects];
  for (auto& rc : rects) {
    rc.hh = spec.n1 * (0.08 + 0.10 * rng.next_unit());
    rc.hw = spec.n2 * (0.08 + 0.10 * rng.next_unit());
    rc.cy = rc.hh + (spec.n1 - 2 * rc.hh) * rng.next_unit();
    rc.cx = rc.hw + (spec.n2 - 2 * rc.hw) * rng.next_unit();
    const double dir = 2.0 * 3.14159265358979323846 * rng.next_unit();
    rc.vy = spec.amplitude * std::sin(dir);
    rc.vx = spec.amplitude * std::cos(dir);
    rc.val = 0.45 + 0.5 * rng.next_unit();
  }
  for (int f = 0; f < spec.frames; ++f) {
    for (int r = 0; r < spec.n1; ++r)
      for (int c = 0; c < spec.n2; ++c) x.at(f, r, c) = 0.15;
    for (auto& rc : rects) {
      // soft edges: one-pixel linear falloff
      for (int r = 0; r < spec.n1; ++r)
        for (int c = 0; c < spec.n2; ++c) {
          const double dy = std::fabs(r - rc.cy) - rc.hh;
          const double dx = std::fabs(c - rc.cx) - rc.hw;
          const double cov =
              (1.0 - clamp01(std::max(dy, 0.0))) * (1.0 - clamp01(std::max(dx, 0.0)));
          if (dy < 1.0 && dx < 1.0) {
            double& v = x.at(f, r, c);
            v = v + cov * (rc.val - v);
          }
        }
      // advance with reflection off the borders
      rc.cy += rc.vy;
      rc.cx += rc.vx;
      if (rc.cy < rc.hh) { rc.cy = 2 * rc.hh - rc.cy; rc.vy = -rc.vy; }
      if (rc.cy > spec.n1 - rc.hh) { rc.cy = 2 * (spec.n1 - rc.hh) - rc.cy; rc.vy = -rc.vy; }
      if (rc.cx < rc.hw) { rc.cx = 2 * rc.hw - rc.cx; rc.vx = -rc.vx; }
      if (rc.cx > spec.n2 - rc.hw) { rc.cx = 2 * (spec.n2 - rc.hw) - rc.cx; rc.vx = -rc.vx; }
    }
  }
  return x;
}

}  // namespace detail

inline VideoCube gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n1 < 1 || spec.n2 < 1 || spec.frames < 1)
    throw std::invalid_argument("gen_synthetic: dimensions must be >= 1");
  CounterRng rng(spec.seed, Stream::Synthetic,
                 static_cast<std::uint64_t>(spec.kind));
  VideoCube x;
  switch (spec.kind) {
    case SyntheticKind::MovingBlob: x = detail::gen_moving_blob(spec, rng); break;
    case SyntheticKind::ShiftingGradient:
      x = detail::gen_shifting_gradient(spec, rng);
      break;
    case SyntheticKind::BouncingRects:
      x = detail::gen_bouncing_rects(spec, rng);
      break;
  }
  for (double& v : x.data) v = clamp01(v);
  return x;
}

}  // namespace scibdvp
