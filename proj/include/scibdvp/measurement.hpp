// SCI measurement model.
//
// A binary mask cube C modulates each frame before the sensor sums them:
//   Y = sum_i C_i (.) X_i + Z.
// Column-wise the mask forms the sensing matrix H = [D_1,...,D_B] with
// D_i = diag(vec(C_i)), so H H^T is diagonal with entry j equal to the
// number of frames whose mask is open at pixel j. That diagonal makes the
// GAP step closed-form and is kept precomputed in SensingOperator.

#pragma once

#include <cstdint>
#include <utility>

#include "scibdvp/core.hpp"
#include "scibdvp/rng.hpp"

namespace scibdvp {

struct MaskCube {
  int n1 = 0;
  int n2 = 0;
  int frames = 0;
  std::vector<std::uint8_t> bits;  // frame-major, values in {0,1}
  double p = -1.0;                 // Bernoulli parameter; -1 when unknown (loaded from file)
  std::uint64_t seed = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(n1) * n2; }
  std::size_t size() const { return pixels() * frames; }
  std::uint8_t bit(int f, int r, int c) const {
    return bits[(static_cast<std::size_t>(f) * n1 + r) * n2 + c];
  }
  const std::uint8_t* frame(int f) const {
    return bits.data() + static_cast<std::size_t>(f) * pixels();
  }
};

struct SensingOperator {
  MaskCube mask;
  std::vector<double> gram_diag;  // per pixel: count of open mask frames

  int n1() const { return mask.n1; }
  int n2() const { return mask.n2; }
  int frames() const { return mask.frames; }
};

inline MaskCube gen_mask(int n1, int n2, int frames, double p,
                         std::uint64_t seed, std::uint64_t instance = 0) {
  if (n1 < 1 || n2 < 1 || frames < 1)
    throw std::invalid_argument("gen_mask: dimensions must be >= 1");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("gen_mask: p must lie in [0,1]");
  MaskCube m;
  m.n1 = n1;
  m.n2 = n2;
  m.frames = frames;
  m.p = p;
  m.seed = seed;
  m.bits.resize(m.size());
  CounterRng rng(seed, Stream::Mask, instance);
  for (auto& b : m.bits) b = rng.next_bernoulli(p) ? 1 : 0;
  return m;
}

inline SensingOperator make_operator(MaskCube mask) {
  SensingOperator op;
  op.gram_diag.assign(mask.pixels(), 0.0);
  for (int f = 0; f < mask.frames; ++f) {
    const std::uint8_t* src = mask.frame(f);
    for (std::size_t j = 0; j < op.gram_diag.size(); ++j) op.gram_diag[j] += src[j];
  }
  op.mask = std::move(mask);
  return op;
}

// Y[j] = sum_i C_i[j] * X_i[j]. The result carries sigma = 0; noise is a
// separate, explicit step.
inline Measurement forward(const SensingOperator& op, const VideoCube& x) {
  if (x.n1 != op.n1() || x.n2 != op.n2() || x.frames != op.frames())
    throw std::invalid_argument("forward: cube/operator shape mismatch");
  Measurement y(x.n1, x.n2, 0.0);
  for (int f = 0; f < x.frames; ++f) {
    const std::uint8_t* c = op.mask.frame(f);
    const double* src = x.frame(f);
    for (std::size_t j = 0; j < y.size(); ++j)
      if (c[j]) y.data[j] += src[j];
  }
  return y;
}

// Frame i of H^T y is C_i (.) Y.
inline VideoCube adjoint(const SensingOperator& op, const Measurement& y) {
  if (y.n1 != op.n1() || y.n2 != op.n2())
    throw std::invalid_argument("adjoint: measurement/operator shape mismatch");
  VideoCube x(y.n1, y.n2, op.frames());
  for (int f = 0; f < x.frames; ++f) {
    const std::uint8_t* c = op.mask.frame(f);
    double* dst = x.frame(f);
    for (std::size_t j = 0; j < y.size(); ++j) dst[j] = c[j] ? y.data[j] : 0.0;
  }
  return x;
}

// (H H^T)^-1 r with the pseudo-inverse convention: pixels no frame covers
// map to 0, which keeps GAP defined for sparse masks (small p).
inline Measurement gram_apply_inverse(const SensingOperator& op,
                                      const Measurement& r) {
  if (r.n1 != op.n1() || r.n2 != op.n2())
    throw std::invalid_argument("gram_apply_inverse: shape mismatch");
  Measurement out(r.n1, r.n2, 0.0);
  for (std::size_t j = 0; j < out.size(); ++j)
    out.data[j] = op.gram_diag[j] > 0.0 ? r.data[j] / op.gram_diag[j] : 0.0;
  out.sigma = r.sigma;
  return out;
}

// Adds i.i.d. Gaussian noise of standard deviation sigma/255 ([0,1] units)
// and records sigma (0-255 scale) on the result.
inline Measurement add_noise(const Measurement& y, double sigma,
                             std::uint64_t seed, std::uint64_t instance = 0) {
  if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be >= 0");
  Measurement out = y;
  out.sigma = sigma;
  if (sigma == 0.0) return out;
  CounterRng rng(seed, Stream::Noise, instance);
  const double sd = sigma / 255.0;
  for (double& v : out.data) v += sd * rng.next_gaussian();
  return out;
}

// Sub-operator and co-located measurement slice over a spatial region (all
// frames). H's diagonal blocks touch each pixel independently, so the
// restriction commutes with forward/adjoint on the region.
inline std::pair<SensingOperator, Measurement> restrict_region(
    const SensingOperator& op, const Measurement& y, const Region& rg) {
  if (y.n1 != op.n1() || y.n2 != op.n2())
    throw std::invalid_argument("restrict_region: shape mismatch");
  if (rg.r0 < 0 || rg.c0 < 0 || rg.h < 1 || rg.w < 1 ||
      rg.r0 + rg.h > op.n1() || rg.c0 + rg.w > op.n2())
    throw std::invalid_argument("restrict_region: region out of bounds");

  MaskCube sub;
  sub.n1 = rg.h;
  sub.n2 = rg.w;
  sub.frames = op.frames();
  sub.p = op.mask.p;
  sub.seed = op.mask.seed;
  sub.bits.resize(sub.size());
  for (int f = 0; f < sub.frames; ++f) {
    const std::uint8_t* src = op.mask.frame(f);
    std::uint8_t* dst = sub.bits.data() + static_cast<std::size_t>(f) * sub.pixels();
    for (int r = 0; r < rg.h; ++r)
      for (int c = 0; c < rg.w; ++c)
        dst[static_cast<std::size_t>(r) * rg.w + c] =
            src[static_cast<std::size_t>(rg.r0 + r) * op.n2() + (rg.c0 + c)];
  }

  Measurement ys(rg.h, rg.w);
  ys.sigma = y.sigma;
  for (int r = 0; r < rg.h; ++r)
    for (int c = 0; c < rg.w; ++c) ys.at(r, c) = y.at(rg.r0 + r, rg.c0 + c);

  return {make_operator(std::move(sub)), std::move(ys)};
}

// l2 norm of the data residual y - Hx.
inline double residual_norm(const SensingOperator& op, const Measurement& y,
                            const VideoCube& x) {
  const Measurement hx = forward(op, x);
  double s = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double d = y.data[j] - hx.data[j];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace scibdvp
