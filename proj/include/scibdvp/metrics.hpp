// PSNR and single-scale SSIM on [0,1] video cubes.
//
// Both metrics are computed per frame and averaged over frames. SSIM uses
// the original index's defaults: 11x11 Gaussian window with sigma = 1.5,
// C1 = (0.01*MAX)^2, C2 = (0.03*MAX)^2, valid windows only (no padding).

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "scibdvp/core.hpp"

namespace scibdvp {

inline constexpr double kPsnrInf = std::numeric_limits<double>::infinity();

struct MetricsReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<double> per_frame_psnr;
  std::vector<double> per_frame_ssim;
};

namespace detail {

inline double frame_mse(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s / static_cast<double>(n);
}

// Normalized 11-tap Gaussian, sigma = 1.5.
inline const std::array<double, 11>& ssim_window_1d() {
  static const std::array<double, 11> w = [] {
    std::array<double, 11> g{};
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5.0;
      g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return w;
}

// Gaussian-weighted local mean via separable passes; rows/cols outside the
// valid band are left untouched.
inline void ssim_blur(const std::vector<double>& src, int h, int w,
                      std::vector<double>& tmp, std::vector<double>& dst) {
  const auto& k = ssim_window_1d();
  tmp.assign(src.size(), 0.0);
  dst.assign(src.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    const double* in = src.data() + static_cast<std::size_t>(r) * w;
    double* out = tmp.data() + static_cast<std::size_t>(r) * w;
    for (int c = 5; c < w - 5; ++c) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) s += k[i] * in[c - 5 + i];
      out[c] = s;
    }
  }
  for (int r = 5; r < h - 5; ++r) {
    double* out = dst.data() + static_cast<std::size_t>(r) * w;
    for (int c = 5; c < w - 5; ++c) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i)
        s += k[i] * tmp[static_cast<std::size_t>(r - 5 + i) * w + c];
      out[c] = s;
    }
  }
}

inline double frame_ssim(const double* a, const double* b, int h, int w) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> xa(a, a + n), xb(b, b + n);
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t j = 0; j < n; ++j) {
    aa[j] = xa[j] * xa[j];
    bb[j] = xb[j] * xb[j];
    ab[j] = xa[j] * xb[j];
  }
  std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
  ssim_blur(xa, h, w, tmp, mu_a);
  ssim_blur(xb, h, w, tmp, mu_b);
  ssim_blur(aa, h, w, tmp, m_aa);
  ssim_blur(bb, h, w, tmp, m_bb);
  ssim_blur(ab, h, w, tmp, m_ab);

  constexpr double c1 = 0.01 * 0.01;  // (K1*MAX)^2, MAX = 1
  constexpr double c2 = 0.03 * 0.03;
  double acc = 0.0;
  std::size_t count = 0;
  for (int r = 5; r < h - 5; ++r) {
    for (int c = 5; c < w - 5; ++c) {
      const std::size_t j = static_cast<std::size_t>(r) * w + c;
      const double ma = mu_a[j], mb = mu_b[j];
      const double va = m_aa[j] - ma * ma;
      const double vb = m_bb[j] - mb * mb;
      const double cov = m_ab[j] - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      acc += num / den;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace detail

// Mean over frames of 10*log10(1/MSE_frame); +inf sentinel when identical.
inline double psnr(const VideoCube& x, const VideoCube& x_hat) {
  if (!x.same_shape(x_hat)) throw std::invalid_argument("psnr: shape mismatch");
  double acc = 0.0;
  for (int f = 0; f < x.frames; ++f) {
    const double mse = detail::frame_mse(x.frame(f), x_hat.frame(f), x.pixels());
    if (mse == 0.0) return kPsnrInf;
    acc += 10.0 * std::log10(1.0 / mse);
  }
  return acc / x.frames;
}

inline double ssim(const VideoCube& x, const VideoCube& x_hat) {
  if (!x.same_shape(x_hat)) throw std::invalid_argument("ssim: shape mismatch");
  if (x.n1 < 11 || x.n2 < 11)
    throw std::invalid_argument("ssim: frames must be at least 11x11");
  double acc = 0.0;
  for (int f = 0; f < x.frames; ++f)
    acc += detail::frame_ssim(x.frame(f), x_hat.frame(f), x.n1, x.n2);
  return acc / x.frames;
}

inline MetricsReport compute_metrics(const VideoCube& x, const VideoCube& x_hat) {
  if (!x.same_shape(x_hat))
    throw std::invalid_argument("compute_metrics: shape mismatch");
  MetricsReport rep;
  for (int f = 0; f < x.frames; ++f) {
    const double mse = detail::frame_mse(x.frame(f), x_hat.frame(f), x.pixels());
    rep.per_frame_psnr.push_back(mse == 0.0 ? kPsnrInf
                                            : 10.0 * std::log10(1.0 / mse));
    if (x.n1 >= 11 && x.n2 >= 11)
      rep.per_frame_ssim.push_back(
          detail::frame_ssim(x.frame(f), x_hat.frame(f), x.n1, x.n2));
  }
  double p = 0.0;
  for (double v : rep.per_frame_psnr) p += v;
  rep.psnr_db = p / x.frames;
  if (!rep.per_frame_ssim.empty()) {
    double s = 0.0;
    for (double v : rep.per_frame_ssim) s += v;
    rep.ssim = s / x.frames;
  }
  return rep;
}

}  // namespace scibdvp
