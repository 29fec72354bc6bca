// Untrained video-prior network: a fixed decoder g_theta(u) mapping a
// frozen random latent to a B-frame patch, with hand-derived reverse-mode
// gradients and an adaptive-moment optimizer.
//
// Architecture: n_blocks repetitions of [2x nearest-neighbour upsample ->
// ReLU -> 3x3 conv, channel-preserving], then a 3x3 conv to B channels and
// a logistic squashing into (0,1). The latent has `channels` feature maps
// at 1/2^n_blocks of the output resolution and stays fixed after init.
//
// Templated on the scalar type: double for gradient oracles and tests,
// float for production training loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scibdvp/core.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/rng.hpp"

namespace scibdvp {

template <typename T>
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  void resize(int c_, int h_, int w_) {
    c = c_;
    h = h_;
    w = w_;
    v.assign(static_cast<std::size_t>(c) * h * w, T(0));
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return plane_size() * c; }
  T* plane(int ch) { return v.data() + ch * plane_size(); }
  const T* plane(int ch) const { return v.data() + ch * plane_size(); }
  T& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  T at(int ch, int y, int x) const {
    return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
};

struct DVPArchitecture {
  int out_h = 0;
  int out_w = 0;
  int out_frames = 0;
  int channels = 128;
  int n_blocks = 3;

  int latent_h() const { return out_h >> n_blocks; }
  int latent_w() const { return out_w >> n_blocks; }

  bool dims_divisible() const {
    const int d = 1 << n_blocks;
    return out_h % d == 0 && out_w % d == 0 && latent_h() >= 1 && latent_w() >= 1;
  }

  // k = n_blocks (9 ch^2 + ch) + (9 ch B + B)
  std::int64_t param_count() const {
    const std::int64_t ch = channels, B = out_frames;
    return n_blocks * (ch * ch * 9 + ch) + (ch * B * 9 + B);
  }
};

// Largest block count <= requested for which both dims stay divisible.
inline int fit_blocks(int h, int w, int requested) {
  int b = std::max(0, requested);
  while (b > 0 && (h % (1 << b) != 0 || w % (1 << b) != 0)) --b;
  return b;
}

template <typename T>
struct ConvParams {
  int cin = 0, cout = 0;
  std::vector<T> w;  // [cout][cin][3][3]
  std::vector<T> b;  // [cout]

  void resize(int cin_, int cout_) {
    cin = cin_;
    cout = cout_;
    w.assign(static_cast<std::size_t>(cout) * cin * 9, T(0));
    b.assign(cout, T(0));
  }
};

template <typename T>
struct DVPModel {
  DVPArchitecture arch;
  std::vector<ConvParams<T>> blocks;
  ConvParams<T> head;
  Tensor3<T> latent;  // frozen after init
};

template <typename T>
struct DVPGrads {
  std::vector<ConvParams<T>> blocks;
  ConvParams<T> head;

  void match(const DVPModel<T>& m) {
    blocks.resize(m.blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].resize(m.blocks[i].cin, m.blocks[i].cout);
    head.resize(m.head.cin, m.head.cout);
  }
  void zero() {
    for (auto& l : blocks) {
      std::fill(l.w.begin(), l.w.end(), T(0));
      std::fill(l.b.begin(), l.b.end(), T(0));
    }
    std::fill(head.w.begin(), head.w.end(), T(0));
    std::fill(head.b.begin(), head.b.end(), T(0));
  }
};

namespace detail {

// dst[x] += wl*src[x-1] + wc*src[x] + wr*src[x+1], zero outside the row.
template <typename T>
inline void stencil3(T* __restrict dst, const T* __restrict src, int W, T wl, T wc, T wr) {
  if (W == 1) {
    dst[0] += wc * src[0];
    return;
  }
  dst[0] += wc * src[0] + wr * src[1];
  for (int x = 1; x < W - 1; ++x)
    dst[x] += wl * src[x - 1] + wc * src[x] + wr * src[x + 1];
  dst[W - 1] += wl * src[W - 2] + wc * src[W - 1];
}

// Same-size zero-padded 3x3 correlation of one plane, accumulated into dst.
template <typename T>
void conv3x3_accum_plane(const T* __restrict src, const T* __restrict wk, T* __restrict dst, int H, int W) {
  const T w00 = wk[0], w01 = wk[1], w02 = wk[2];
  const T w10 = wk[3], w11 = wk[4], w12 = wk[5];
  const T w20 = wk[6], w21 = wk[7], w22 = wk[8];
  // interior rows: all three source rows exist, fully fused
  for (int y = 1; y + 1 < H; ++y) {
    const T* a = src + static_cast<std::size_t>(y - 1) * W;
    const T* b = src + static_cast<std::size_t>(y) * W;
    const T* c = src + static_cast<std::size_t>(y + 1) * W;
    T* d = dst + static_cast<std::size_t>(y) * W;
    if (W == 1) {
      d[0] += w01 * a[0] + w11 * b[0] + w21 * c[0];
      continue;
    }
    d[0] += w01 * a[0] + w02 * a[1] + w11 * b[0] + w12 * b[1] + w21 * c[0] +
            w22 * c[1];
    for (int x = 1; x < W - 1; ++x)
      d[x] += w00 * a[x - 1] + w01 * a[x] + w02 * a[x + 1] + w10 * b[x - 1] +
              w11 * b[x] + w12 * b[x + 1] + w20 * c[x - 1] + w21 * c[x] +
              w22 * c[x + 1];
    d[W - 1] += w00 * a[W - 2] + w01 * a[W - 1] + w10 * b[W - 2] +
                w11 * b[W - 1] + w20 * c[W - 2] + w21 * c[W - 1];
  }
  // boundary rows
  stencil3(dst, src, W, w10, w11, w12);
  if (H > 1) {
    stencil3(dst, src + W, W, w20, w21, w22);
    T* last = dst + static_cast<std::size_t>(H - 1) * W;
    stencil3(last, src + static_cast<std::size_t>(H - 2) * W, W, w00, w01, w02);
    stencil3(last, src + static_cast<std::size_t>(H - 1) * W, W, w10, w11, w12);
  }
}

template <typename T>
void conv3x3_forward(const Tensor3<T>& in, const ConvParams<T>& p, Tensor3<T>& out) {
  const int H = in.h, W = in.w;
  out.resize(p.cout, H, W);
  for (int co = 0; co < p.cout; ++co) {
    T* dst = out.plane(co);
    std::fill(dst, dst + out.plane_size(), p.b[co]);
    for (int ci = 0; ci < p.cin; ++ci)
      conv3x3_accum_plane(in.plane(ci),
                          &p.w[(static_cast<std::size_t>(co) * p.cin + ci) * 9],
                          dst, H, W);
  }
}

// dIn is the correlation of dOut with the 180-degree flipped kernel.
template <typename T>
void conv3x3_backward_input(const Tensor3<T>& dout, const ConvParams<T>& p,
                            Tensor3<T>& din) {
  const int H = dout.h, W = dout.w;
  din.resize(p.cin, H, W);
  for (int ci = 0; ci < p.cin; ++ci) {
    T* dst = din.plane(ci);
    for (int co = 0; co < p.cout; ++co) {
      const T* wk = &p.w[(static_cast<std::size_t>(co) * p.cin + ci) * 9];
      T flipped[9];
      for (int i = 0; i < 9; ++i) flipped[i] = wk[8 - i];
      conv3x3_accum_plane(dout.plane(co), flipped, dst, H, W);
    }
  }
}

// a0 += <g, s shifted right>, a1 += <g, s>, a2 += <g, s shifted left>.
template <typename T>
inline void dot3(const T* __restrict g, const T* __restrict s, int W, T& a0, T& a1, T& a2) {
  if (W == 1) {
    a1 += g[0] * s[0];
    return;
  }
  a1 += g[0] * s[0];
  a2 += g[0] * s[1];
  for (int x = 1; x < W - 1; ++x) {
    a0 += g[x] * s[x - 1];
    a1 += g[x] * s[x];
    a2 += g[x] * s[x + 1];
  }
  a0 += g[W - 1] * s[W - 2];
  a1 += g[W - 1] * s[W - 1];
}

template <typename T>
void conv3x3_backward_params(const Tensor3<T>& in, const Tensor3<T>& dout,
                             ConvParams<T>& grad) {
  const int H = in.h, W = in.w;
  for (int co = 0; co < grad.cout; ++co) {
    const T* go = dout.plane(co);
    T bacc = T(0);
    for (std::size_t j = 0; j < dout.plane_size(); ++j) bacc += go[j];
    grad.b[co] += bacc;
    for (int ci = 0; ci < grad.cin; ++ci) {
      const T* src = in.plane(ci);
      T acc[9] = {T(0)};
      for (int y = 0; y < H; ++y) {
        const T* g = go + static_cast<std::size_t>(y) * W;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= H) continue;
          dot3(g, src + static_cast<std::size_t>(sy) * W, W, acc[ky * 3],
               acc[ky * 3 + 1], acc[ky * 3 + 2]);
        }
      }
      T* wk = &grad.w[(static_cast<std::size_t>(co) * grad.cin + ci) * 9];
      for (int i = 0; i < 9; ++i) wk[i] += acc[i];
    }
  }
}

template <typename T>
void upsample2x(const Tensor3<T>& in, Tensor3<T>& out) {
  out.resize(in.c, in.h * 2, in.w * 2);
  for (int ch = 0; ch < in.c; ++ch) {
    const T* src = in.plane(ch);
    T* dst = out.plane(ch);
    for (int y = 0; y < out.h; ++y) {
      const T* srow = src + static_cast<std::size_t>(y >> 1) * in.w;
      T* drow = dst + static_cast<std::size_t>(y) * out.w;
      for (int x = 0; x < out.w; ++x) drow[x] = srow[x >> 1];
    }
  }
}

template <typename T>
void upsample2x_backward(const Tensor3<T>& dout, Tensor3<T>& din) {
  din.resize(dout.c, dout.h / 2, dout.w / 2);
  for (int ch = 0; ch < dout.c; ++ch) {
    const T* src = dout.plane(ch);
    T* dst = din.plane(ch);
    for (int y = 0; y < dout.h; ++y) {
      const T* srow = src + static_cast<std::size_t>(y) * dout.w;
      T* drow = dst + static_cast<std::size_t>(y >> 1) * din.w;
      for (int x = 0; x < dout.w; ++x) drow[x >> 1] += srow[x];
    }
  }
}

template <typename T>
T logistic(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace detail

template <typename T>
struct DVPWorkspace {
  std::vector<Tensor3<T>> relu_out;  // post-ReLU conv inputs, one per block
  std::vector<Tensor3<T>> block_out; // conv outputs z_1..z_n
  Tensor3<T> output;                 // g = logistic(head(z_n)), c = B
  Tensor3<T> d_a, d_b;               // backward scratch
  Tensor3<T> d_out;                  // dL/dg
};

template <typename T>
DVPModel<T> init_dvp(const DVPArchitecture& arch, std::uint64_t seed,
                     std::uint64_t instance = 0) {
  if (arch.out_h < 1 || arch.out_w < 1 || arch.out_frames < 1 ||
      arch.channels < 1 || arch.n_blocks < 0)
    throw std::invalid_argument("init_dvp: invalid architecture");
  if (!arch.dims_divisible())
    throw std::invalid_argument(
        "init_dvp: output dims must be divisible by 2^n_blocks");

  DVPModel<T> m;
  m.arch = arch;

  CounterRng lat_rng(seed, Stream::Latent, instance);
  m.latent.resize(arch.channels, arch.latent_h(), arch.latent_w());
  for (auto& v : m.latent.v) v = static_cast<T>(lat_rng.next_unit());

  CounterRng w_rng(seed, Stream::Weights, instance);
  auto fill_layer = [&](ConvParams<T>& l, int cin, int cout) {
    l.resize(cin, cout);
    const double bound = std::sqrt(1.0 / (9.0 * cin));
    for (auto& v : l.w)
      v = static_cast<T>((2.0 * w_rng.next_unit() - 1.0) * bound);
    for (auto& v : l.b)
      v = static_cast<T>((2.0 * w_rng.next_unit() - 1.0) * bound);
  };
  m.blocks.resize(arch.n_blocks);
  for (auto& blk : m.blocks) fill_layer(blk, arch.channels, arch.channels);
  fill_layer(m.head, arch.channels, arch.out_frames);
  return m;
}

// Runs the decoder; ws.output holds g with c = B, h = out_h, w = out_w.
template <typename T>
void forward_dvp(const DVPModel<T>& m, DVPWorkspace<T>& ws) {
  const int n = m.arch.n_blocks;
  ws.relu_out.resize(n);
  ws.block_out.resize(n);
  const Tensor3<T>* cur = &m.latent;
  for (int b = 0; b < n; ++b) {
    detail::upsample2x(*cur, ws.relu_out[b]);
    for (auto& v : ws.relu_out[b].v) v = v > T(0) ? v : T(0);
    detail::conv3x3_forward(ws.relu_out[b], m.blocks[b], ws.block_out[b]);
    cur = &ws.block_out[b];
  }
  detail::conv3x3_forward(*cur, m.head, ws.output);
  for (auto& v : ws.output.v) v = detail::logistic(v);
}

template <typename T>
VideoCube to_cube(const Tensor3<T>& t) {
  VideoCube out(t.h, t.w, t.c);
  for (std::size_t i = 0; i < t.v.size(); ++i)
    out.data[i] = static_cast<double>(t.v[i]);
  return out;
}

// Convenience path for callers that do not manage a workspace.
template <typename T>
VideoCube forward_dvp(const DVPModel<T>& m) {
  DVPWorkspace<T> ws;
  forward_dvp(m, ws);
  return to_cube(ws.output);
}

// Backpropagates ws.d_out (dL/dg) through the cached forward pass,
// accumulating into grads.
template <typename T>
void backward_dvp(const DVPModel<T>& m, DVPWorkspace<T>& ws, DVPGrads<T>& grads) {
  const int n = m.arch.n_blocks;
  // through the logistic: do = dg * g * (1 - g)
  Tensor3<T>& dz = ws.d_a;
  dz.resize(ws.output.c, ws.output.h, ws.output.w);
  for (std::size_t i = 0; i < dz.v.size(); ++i) {
    const T g = ws.output.v[i];
    dz.v[i] = ws.d_out.v[i] * g * (T(1) - g);
  }
  const Tensor3<T>& head_in = n > 0 ? ws.block_out[n - 1] : m.latent;
  detail::conv3x3_backward_params(head_in, dz, grads.head);
  detail::conv3x3_backward_input(dz, m.head, ws.d_b);

  for (int b = n - 1; b >= 0; --b) {
    // ws.d_b holds dL/d block_out[b]
    detail::conv3x3_backward_params(ws.relu_out[b], ws.d_b, grads.blocks[b]);
    detail::conv3x3_backward_input(ws.d_b, m.blocks[b], ws.d_a);
    for (std::size_t i = 0; i < ws.d_a.v.size(); ++i)
      if (!(ws.relu_out[b].v[i] > T(0))) ws.d_a.v[i] = T(0);
    detail::upsample2x_backward(ws.d_a, ws.d_b);
  }
}

// Loss pieces are optional: `target` is the projection target (same shape
// as the output, possibly a padded patch), and (y, op) the
// measurement-consistency term evaluated on the centred interior whose
// size matches op. loss = ||g - target||^2 + omega ||y - H g_int||^2.
template <typename T>
double loss_and_grad(const DVPModel<T>& m, DVPWorkspace<T>& ws,
                     const Tensor3<T>* target, const Measurement* y,
                     const SensingOperator* op, double omega,
                     DVPGrads<T>& grads) {
  if (omega < 0.0) throw std::invalid_argument("loss_and_grad: omega >= 0");
  forward_dvp(m, ws);
  Tensor3<T>& g = ws.output;
  ws.d_out.resize(g.c, g.h, g.w);
  std::fill(ws.d_out.v.begin(), ws.d_out.v.end(), T(0));

  double loss = 0.0;
  if (target) {
    if (target->c != g.c || target->h != g.h || target->w != g.w)
      throw std::invalid_argument("loss_and_grad: target shape mismatch");
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      const double d = static_cast<double>(g.v[i]) - static_cast<double>(target->v[i]);
      loss += d * d;
      ws.d_out.v[i] = static_cast<T>(2.0 * d);
    }
  }
  if (y && op) {
    if (op->frames() != g.c)
      throw std::invalid_argument("loss_and_grad: operator frame mismatch");
    if (y->n1 != op->n1() || y->n2 != op->n2())
      throw std::invalid_argument("loss_and_grad: measurement shape mismatch");
    const int oy = (g.h - op->n1()) / 2, ox = (g.w - op->n2()) / 2;
    if (oy < 0 || ox < 0 || (g.h - op->n1()) % 2 != 0 || (g.w - op->n2()) % 2 != 0)
      throw std::invalid_argument("loss_and_grad: interior does not centre in output");
    const int hi = op->n1(), wi = op->n2();
    std::vector<double> resid(static_cast<std::size_t>(hi) * wi);
    for (int r = 0; r < hi; ++r)
      for (int c = 0; c < wi; ++c) {
        double acc = 0.0;
        for (int f = 0; f < g.c; ++f)
          if (op->mask.bit(f, r, c)) acc += static_cast<double>(g.at(f, oy + r, ox + c));
        resid[static_cast<std::size_t>(r) * wi + c] = y->at(r, c) - acc;
      }
    double meas = 0.0;
    for (double v : resid) meas += v * v;
    loss += omega * meas;
    for (int f = 0; f < g.c; ++f)
      for (int r = 0; r < hi; ++r)
        for (int c = 0; c < wi; ++c)
          if (op->mask.bit(f, r, c))
            ws.d_out.at(f, oy + r, ox + c) += static_cast<T>(
                -2.0 * omega * resid[static_cast<std::size_t>(r) * wi + c]);
  }

  grads.zero();
  backward_dvp(m, ws, grads);
  return loss;
}

// Convenience wrapper taking the target as a cube.
template <typename T>
std::pair<double, DVPGrads<T>> loss_and_grad(const DVPModel<T>& m,
                                             const VideoCube& target,
                                             const Measurement* y,
                                             const SensingOperator* op,
                                             double omega) {
  Tensor3<T> t;
  t.resize(target.frames, target.n1, target.n2);
  for (std::size_t i = 0; i < t.v.size(); ++i)
    t.v[i] = static_cast<T>(target.data[i]);
  DVPWorkspace<T> ws;
  DVPGrads<T> grads;
  grads.match(m);
  const double loss = loss_and_grad(m, ws, &t, y, op, omega, grads);
  return {loss, std::move(grads)};
}

// ---- Adam ----------------------------------------------------------------

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<T> m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// One bias-corrected update over a flat parameter array.
template <typename T>
void adam_update(T* params, const T* grads, T* m, T* v, std::size_t n,
                 double lr, std::int64_t step, double beta1, double beta2,
                 double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = static_cast<double>(grads[i]);
    const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
    const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    params[i] -= static_cast<T>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
  }
}

template <typename T>
void adam_step(DVPModel<T>& model, const DVPGrads<T>& grads, AdamState<T>& st,
               double lr) {
  const std::size_t total = static_cast<std::size_t>(model.arch.param_count());
  if (st.m.size() != total) {
    st.m.assign(total, T(0));
    st.v.assign(total, T(0));
    st.step = 0;
  }
  ++st.step;
  std::size_t off = 0;
  auto upd = [&](std::vector<T>& p, const std::vector<T>& g) {
    adam_update(p.data(), g.data(), st.m.data() + off, st.v.data() + off,
                p.size(), lr, st.step, st.beta1, st.beta2, st.eps);
    off += p.size();
  };
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    upd(model.blocks[i].w, grads.blocks[i].w);
    upd(model.blocks[i].b, grads.blocks[i].b);
  }
  upd(model.head.w, grads.head.w);
  upd(model.head.b, grads.head.b);
}

// ---- Training loop --------------------------------------------------------

// Linear ramp from 0 to lr over the first `warmup` steps; guards the
// small-channel decoders against early feature collapse.
inline double warmed_lr(double lr, int step, int warmup) {
  return warmup > 0 && step < warmup ? lr * (step + 1) / warmup : lr;
}

// A decoder is dead when some ReLU layer is zero at every position: no
// gradient reaches the layers below and the output is stuck at a constant.
template <typename T>
bool network_dead(const DVPWorkspace<T>& ws) {
  for (const auto& r : ws.relu_out) {
    bool alive = false;
    for (const T v : r.v)
      if (v > T(0)) {
        alive = true;
        break;
      }
    if (!alive) return true;
  }
  return false;
}

// Detects a frozen optimizer: healthy Adam trajectories keep the loss
// moving at least in the low digits, while collapse modes (dead ReLUs,
// saturated outputs, post-overshoot moment blowup) pin it to a constant.
template <typename T>
struct TrainingStallGuard {
  T last = T(0);
  int window = 25;

  bool frozen(T loss, int step) {
    if (step % window != 0) return false;
    const bool stuck =
        step > 0 && std::fabs(static_cast<double>(loss - last)) <=
                        1e-9 * std::max(1.0, std::fabs(static_cast<double>(last)));
    last = loss;
    return stuck;
  }
};

template <typename T>
void train_dvp(DVPModel<T>& model, const VideoCube* target,
               const Measurement* y, const SensingOperator* op, double omega,
               int iters, double lr, std::vector<double>* loss_history = nullptr,
               int lr_warmup = 0) {
  if (iters < 1) throw std::invalid_argument("train_dvp: iters >= 1");
  Tensor3<T> t;
  const Tensor3<T>* tp = nullptr;
  if (target) {
    t.resize(target->frames, target->n1, target->n2);
    for (std::size_t i = 0; i < t.v.size(); ++i)
      t.v[i] = static_cast<T>(target->data[i]);
    tp = &t;
  }
  DVPWorkspace<T> ws;
  DVPGrads<T> grads;
  grads.match(model);
  AdamState<T> adam;
  for (int it = 0; it < iters; ++it) {
    const double loss = loss_and_grad(model, ws, tp, y, op, omega, grads);
    if (loss_history) loss_history->push_back(loss);
    adam_step(model, grads, adam, warmed_lr(lr, it, lr_warmup));
  }
}

}  // namespace scibdvp
