// Bagged video-prior projection.
//
// For each scale k the frame is tiled into non-overlapping patches; every
// patch gets its own freshly initialized DVP (independent latent stream)
// trained on the mirror-padded target slice with a measurement-consistency
// regularizer on the unpadded interior. Per-scale reconstructions are the
// concatenation of their trained patches, and the projection output is the
// arithmetic mean over scales.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scibdvp/core.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/nn.hpp"

namespace scibdvp {

struct ScaleSpec {
  int patch_h = 0;
  int patch_w = 0;

  // mirror padding of patch/8 per side, per axis
  int pad_h() const { return patch_h / 8; }
  int pad_w() const { return patch_w / 8; }
};

struct BaggedConfig {
  std::vector<ScaleSpec> scales;
  std::vector<int> inner_iters;  // aligned with scales
  double omega = 0.1;
  double lr = 0.01;
  int lr_warmup = 50;  // linear ramp steps at the start of each training
  int channels = 128;
  int max_blocks = 3;
  std::uint64_t seed = 0;
  bool warm_start = false;        // default: cold start every projection
  bool single_precision = false;  // f32 trains no faster than f64 on AVX-512
};

inline std::vector<Region> partition(int n1, int n2, const ScaleSpec& scale) {
  if (scale.patch_h < 1 || scale.patch_w < 1)
    throw std::invalid_argument("partition: patch dims must be >= 1");
  if (n1 % scale.patch_h != 0 || n2 % scale.patch_w != 0)
    throw std::invalid_argument("partition: patch dims must divide frame dims");
  std::vector<Region> out;
  out.reserve(static_cast<std::size_t>(n1 / scale.patch_h) * (n2 / scale.patch_w));
  for (int r = 0; r < n1; r += scale.patch_h)
    for (int c = 0; c < n2; c += scale.patch_w)
      out.push_back({r, c, scale.patch_h, scale.patch_w});
  return out;
}

// Reflection padding on both spatial sides of every frame; the edge sample
// is not repeated ([a,b,c] with pad 1 -> [b,a,b,c,b]).
inline VideoCube mirror_pad(const VideoCube& x, int pad_h, int pad_w) {
  if (pad_h < 0 || pad_w < 0 || pad_h >= x.n1 || pad_w >= x.n2)
    throw std::invalid_argument("mirror_pad: pad must lie in [0, dim)");
  VideoCube out(x.n1 + 2 * pad_h, x.n2 + 2 * pad_w, x.frames);
  auto reflect = [](int i, int dim) {
    if (i < 0) return -i;
    if (i >= dim) return 2 * dim - 2 - i;
    return i;
  };
  for (int f = 0; f < x.frames; ++f)
    for (int r = 0; r < out.n1; ++r) {
      const int sr = reflect(r - pad_h, x.n1);
      for (int c = 0; c < out.n2; ++c)
        out.at(f, r, c) = x.at(f, sr, reflect(c - pad_w, x.n2));
    }
  return out;
}

inline VideoCube mirror_pad(const VideoCube& x, int pad) {
  return mirror_pad(x, pad, pad);
}

inline VideoCube crop_pad(const VideoCube& x, int pad_h, int pad_w) {
  if (x.n1 <= 2 * pad_h || x.n2 <= 2 * pad_w)
    throw std::invalid_argument("crop_pad: pad too large for cube");
  return x.crop({pad_h, pad_w, x.n1 - 2 * pad_h, x.n2 - 2 * pad_w});
}

inline VideoCube crop_pad(const VideoCube& x, int pad) {
  return crop_pad(x, pad, pad);
}

// Pointwise arithmetic mean of the per-scale estimates.
inline VideoCube bag(const std::vector<VideoCube>& estimates) {
  if (estimates.empty()) throw std::invalid_argument("bag: empty estimate list");
  VideoCube out = estimates[0];
  for (std::size_t k = 1; k < estimates.size(); ++k) {
    if (!out.same_shape(estimates[k]))
      throw std::invalid_argument("bag: estimate shape mismatch");
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += estimates[k].data[i];
  }
  const double inv = 1.0 / static_cast<double>(estimates.size());
  for (double& v : out.data) v *= inv;
  return out;
}

template <typename T>
struct RegionState {
  DVPModel<T> model;
  AdamState<T> adam;
  bool initialized = false;
};

// Warm-start storage, indexed [scale][region]; unused under cold start.
struct BdvpState {
  std::vector<std::vector<RegionState<float>>> f32;
  std::vector<std::vector<RegionState<double>>> f64;
};

namespace detail {

// Architecture for a padded patch: 3 upsampling blocks when the padded dims
// allow it, otherwise the largest power of two that divides them.
inline DVPArchitecture patch_arch(int padded_h, int padded_w, int frames,
                                  const BaggedConfig& cfg) {
  DVPArchitecture arch;
  arch.out_h = padded_h;
  arch.out_w = padded_w;
  arch.out_frames = frames;
  arch.channels = cfg.channels;
  arch.n_blocks = fit_blocks(padded_h, padded_w, cfg.max_blocks);
  return arch;
}

// Trains the DVP of one region and returns its cropped reconstruction.
// x_g == nullptr drops the projection-target term (end-to-end mode).
template <typename T>
VideoCube project_region(const VideoCube* x_g, const Measurement& y,
                         const SensingOperator& op, const Region& rg,
                         const ScaleSpec& scale, const BaggedConfig& cfg,
                         int iters, std::uint64_t instance,
                         RegionState<T>* state) {
  auto [op_i, y_i] = restrict_region(op, y, rg);
  const int ph = scale.pad_h(), pw = scale.pad_w();

  VideoCube target;
  const VideoCube* target_ptr = nullptr;
  if (x_g) {
    target = mirror_pad(x_g->crop(rg), ph, pw);
    target_ptr = &target;
  }

  const DVPArchitecture arch =
      patch_arch(rg.h + 2 * ph, rg.w + 2 * pw, op.frames(), cfg);

  Tensor3<T> t;
  const Tensor3<T>* tp = nullptr;
  if (target_ptr) {
    t.resize(target_ptr->frames, target_ptr->n1, target_ptr->n2);
    for (std::size_t i = 0; i < t.v.size(); ++i)
      t.v[i] = static_cast<T>(target_ptr->data[i]);
    tp = &t;
  }

  DVPModel<T> local;
  AdamState<T> local_adam;
  DVPModel<T>* model = state && state->initialized ? &state->model : nullptr;
  AdamState<T>& adam = state ? state->adam : local_adam;
  DVPWorkspace<T> ws;
  DVPGrads<T> grads;

  // A frozen decoder (ReLU collapse or a saturation freeze after an
  // overshoot) pins the loss to a constant; retry from the next derived
  // seed at half the learning rate. Deterministic per stream.
  constexpr int kMaxAttempts = 3;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    if (!model || attempt > 0) {
      const std::uint64_t inst =
          attempt == 0 ? instance : stream_instance(instance, 0x7e7a, attempt);
      local = init_dvp<T>(arch, cfg.seed, inst);
      if (state) {
        state->model = std::move(local);
        state->initialized = true;
        model = &state->model;
      } else {
        model = &local;
      }
      adam = AdamState<T>{};
    }
    grads.match(*model);
    const int warmup = adam.step == 0 ? std::min(cfg.lr_warmup, iters / 4) : 0;
    const double lr = cfg.lr / static_cast<double>(1 << attempt);
    TrainingStallGuard<double> stall;
    bool frozen = false;
    for (int it = 0; it < iters; ++it) {
      const double loss = loss_and_grad(*model, ws, tp, &y_i, &op_i, cfg.omega, grads);
      if (stall.frozen(loss, it) || (it % 25 == 24 && network_dead(ws))) {
        frozen = true;
        break;
      }
      adam_step(*model, grads, adam, warmed_lr(lr, it, warmup));
    }
    if (!frozen) {
      forward_dvp(*model, ws);
      if (!network_dead(ws)) break;
    }
  }
  return crop_pad(to_cube(ws.output), ph, pw);
}

template <typename T>
VideoCube project_scale_impl(const VideoCube* x_g, const Measurement& y,
                             const SensingOperator& op, const ScaleSpec& scale,
                             const BaggedConfig& cfg, int scale_idx, int iters,
                             std::uint64_t instance,
                             std::vector<RegionState<T>>* state) {
  const std::vector<Region> regions = partition(op.n1(), op.n2(), scale);
  if (state && state->size() != regions.size()) state->resize(regions.size());
  VideoCube out(op.n1(), op.n2(), op.frames());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::uint64_t inst =
        stream_instance(instance, static_cast<std::uint64_t>(scale_idx), i);
    VideoCube patch =
        project_region<T>(x_g, y, op, regions[i], scale, cfg, iters, inst,
                          state ? &(*state)[i] : nullptr);
    out.paste(regions[i], patch);
  }
  return out;
}

inline int iters_for_scale(const BaggedConfig& cfg, int scale_idx) {
  if (scale_idx < static_cast<int>(cfg.inner_iters.size()))
    return cfg.inner_iters[scale_idx];
  if (!cfg.inner_iters.empty()) return cfg.inner_iters.back();
  throw std::invalid_argument("BaggedConfig: inner_iters not set");
}

}  // namespace detail

// One scale of the projection; regions never blend (disjoint tiling).
inline VideoCube project_scale(const VideoCube& x_g, const Measurement& y,
                               const SensingOperator& op, const ScaleSpec& scale,
                               const BaggedConfig& cfg, int scale_idx = 0,
                               std::uint64_t instance = 0) {
  const int iters = detail::iters_for_scale(cfg, scale_idx);
  if (cfg.single_precision)
    return detail::project_scale_impl<float>(&x_g, y, op, scale, cfg, scale_idx,
                                             iters, instance, nullptr);
  return detail::project_scale_impl<double>(&x_g, y, op, scale, cfg, scale_idx,
                                            iters, instance, nullptr);
}

// Full bagged projection: every scale, then the mean across scales.
inline VideoCube bdvp_project(const VideoCube& x_g, const Measurement& y,
                              const SensingOperator& op, const BaggedConfig& cfg,
                              std::uint64_t instance = 0,
                              BdvpState* state = nullptr) {
  if (cfg.scales.empty()) throw std::invalid_argument("bdvp_project: no scales");
  std::vector<VideoCube> estimates;
  estimates.reserve(cfg.scales.size());
  for (std::size_t k = 0; k < cfg.scales.size(); ++k) {
    const int iters = detail::iters_for_scale(cfg, static_cast<int>(k));
    if (cfg.single_precision) {
      auto* slot = state && cfg.warm_start
                       ? (state->f32.resize(cfg.scales.size()), &state->f32[k])
                       : nullptr;
      estimates.push_back(detail::project_scale_impl<float>(
          &x_g, y, op, cfg.scales[k], cfg, static_cast<int>(k), iters, instance,
          slot));
    } else {
      auto* slot = state && cfg.warm_start
                       ? (state->f64.resize(cfg.scales.size()), &state->f64[k])
                       : nullptr;
      estimates.push_back(detail::project_scale_impl<double>(
          &x_g, y, op, cfg.scales[k], cfg, static_cast<int>(k), iters, instance,
          slot));
    }
  }
  return bag(estimates);
}

// End-to-end bagged fit: measurement loss only, no projection target.
inline VideoCube bdvp_e2e(const Measurement& y, const SensingOperator& op,
                          const BaggedConfig& cfg, std::uint64_t instance = 0) {
  if (cfg.scales.empty()) throw std::invalid_argument("bdvp_e2e: no scales");
  std::vector<VideoCube> estimates;
  estimates.reserve(cfg.scales.size());
  for (std::size_t k = 0; k < cfg.scales.size(); ++k) {
    const int iters = detail::iters_for_scale(cfg, static_cast<int>(k));
    if (cfg.single_precision)
      estimates.push_back(detail::project_scale_impl<float>(
          nullptr, y, op, cfg.scales[k], cfg, static_cast<int>(k), iters,
          instance, nullptr));
    else
      estimates.push_back(detail::project_scale_impl<double>(
          nullptr, y, op, cfg.scales[k], cfg, static_cast<int>(k), iters,
          instance, nullptr));
  }
  return bag(estimates);
}

// Square patch ladder {s/4, s/2, s} with s = min(n1, n2), mirroring the
// full-size {64,128,256} structure; every returned patch divides both dims.
inline std::vector<ScaleSpec> default_scales(int n1, int n2) {
  const int s = std::min(n1, n2);
  std::vector<ScaleSpec> out;
  for (int d : {s / 4, s / 2, s})
    if (d >= 8 && n1 % d == 0 && n2 % d == 0) out.push_back({d, d});
  if (out.empty()) throw std::invalid_argument("default_scales: frame too small");
  return out;
}

// The full-frame (largest) scale trains 2x the base iteration count.
inline std::vector<int> default_inner_iters(const std::vector<ScaleSpec>& scales,
                                            int base) {
  std::vector<int> out(scales.size(), base);
  if (!out.empty()) out.back() = 2 * base;
  return out;
}

}  // namespace scibdvp
