// Core value types: video cubes, single-frame measurements, regions.
//
// A VideoCube is an n1 x n2 x B stack of frames stored frame-major
// (frame index slowest, then row, then column). Intensities are
// normalized to [0,1]; under that normalization the peak-amplitude
// symbol of the recovery bounds is fixed at rho = 2.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace scibdvp {

inline constexpr double kRho = 2.0;  // peak amplitude, ||x||_inf <= rho/2

struct Region {
  int r0 = 0;  // top row
  int c0 = 0;  // left column
  int h = 0;
  int w = 0;
};

struct VideoCube {
  int n1 = 0;  // rows per frame
  int n2 = 0;  // columns per frame
  int frames = 0;
  std::vector<double> data;  // frame-major, row-major within a frame

  VideoCube() = default;
  VideoCube(int n1_, int n2_, int frames_, double fill = 0.0)
      : n1(n1_), n2(n2_), frames(frames_) {
    if (n1 < 1 || n2 < 1 || frames < 1)
      throw std::invalid_argument("VideoCube: dimensions must be >= 1");
    data.assign(static_cast<std::size_t>(n1) * n2 * frames, fill);
  }

  std::size_t pixels() const { return static_cast<std::size_t>(n1) * n2; }
  std::size_t size() const { return pixels() * frames; }

  double& at(int f, int r, int c) {
    return data[(static_cast<std::size_t>(f) * n1 + r) * n2 + c];
  }
  double at(int f, int r, int c) const {
    return data[(static_cast<std::size_t>(f) * n1 + r) * n2 + c];
  }
  double* frame(int f) { return data.data() + static_cast<std::size_t>(f) * pixels(); }
  const double* frame(int f) const {
    return data.data() + static_cast<std::size_t>(f) * pixels();
  }

  bool same_shape(const VideoCube& o) const {
    return n1 == o.n1 && n2 == o.n2 && frames == o.frames;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Sub-cube over a spatial region, all frames.
  VideoCube crop(const Region& rg) const {
    check_region(rg);
    VideoCube out(rg.h, rg.w, frames);
    for (int f = 0; f < frames; ++f)
      for (int r = 0; r < rg.h; ++r)
        for (int c = 0; c < rg.w; ++c)
          out.at(f, r, c) = at(f, rg.r0 + r, rg.c0 + c);
    return out;
  }

  void paste(const Region& rg, const VideoCube& patch) {
    check_region(rg);
    if (patch.n1 != rg.h || patch.n2 != rg.w || patch.frames != frames)
      throw std::invalid_argument("VideoCube::paste: patch shape mismatch");
    for (int f = 0; f < frames; ++f)
      for (int r = 0; r < rg.h; ++r)
        for (int c = 0; c < rg.w; ++c)
          at(f, rg.r0 + r, rg.c0 + c) = patch.at(f, r, c);
  }

  void check_region(const Region& rg) const {
    if (rg.r0 < 0 || rg.c0 < 0 || rg.h < 1 || rg.w < 1 || rg.r0 + rg.h > n1 ||
        rg.c0 + rg.w > n2)
      throw std::invalid_argument("region out of bounds");
  }
};

// Single 2D sensor frame. `sigma` is the noise level on the 0-255 scale
// under which the measurement was taken (0 when noise-free); internally
// noise is applied as sigma/255 in [0,1] units.
struct Measurement {
  int n1 = 0;
  int n2 = 0;
  std::vector<double> data;
  double sigma = 0.0;

  Measurement() = default;
  Measurement(int n1_, int n2_, double fill = 0.0) : n1(n1_), n2(n2_) {
    if (n1 < 1 || n2 < 1)
      throw std::invalid_argument("Measurement: dimensions must be >= 1");
    data.assign(static_cast<std::size_t>(n1) * n2, fill);
  }

  std::size_t size() const { return static_cast<std::size_t>(n1) * n2; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * n2 + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * n2 + c];
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const std::vector<double>& a) {
  return std::sqrt(dot(a, a));
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline VideoCube clamped01(const VideoCube& x) {
  VideoCube out = x;
  for (double& v : out.data) v = clamp01(v);
  return out;
}

// Per-pixel temporal average of the frames.
inline Measurement mean_frame(const VideoCube& x) {
  Measurement m(x.n1, x.n2, 0.0);
  for (int f = 0; f < x.frames; ++f) {
    const double* src = x.frame(f);
    for (std::size_t j = 0; j < m.size(); ++j) m.data[j] += src[j];
  }
  const double inv = 1.0 / x.frames;
  for (double& v : m.data) v *= inv;
  return m;
}

// B-fold repetition of the mean frame (the degenerate reconstruction the
// noisy-case analysis shows high-p masks drift toward).
inline VideoCube mean_frame_repeated(const VideoCube& x) {
  const Measurement m = mean_frame(x);
  VideoCube out(x.n1, x.n2, x.frames);
  for (int f = 0; f < x.frames; ++f) {
    double* dst = out.frame(f);
    for (std::size_t j = 0; j < m.size(); ++j) dst[j] = m.data[j];
  }
  return out;
}

}  // namespace scibdvp
