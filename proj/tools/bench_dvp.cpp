// Micro-benchmark for DVP training throughput; used to size iteration
// budgets for a given machine.

#include <chrono>
#include <cstdio>

#include "scibdvp/bdvp.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/nn.hpp"
#include "scibdvp/synthetic.hpp"

using namespace scibdvp;

template <typename T>
static double bench(int out_h, int out_w, int frames, int channels, int iters) {
  DVPArchitecture arch;
  arch.out_h = out_h;
  arch.out_w = out_w;
  arch.out_frames = frames;
  arch.channels = channels;
  arch.n_blocks = fit_blocks(out_h, out_w, 3);
  auto model = init_dvp<T>(arch, 1);

  SyntheticSpec spec;
  spec.n1 = out_h;
  spec.n2 = out_w;
  spec.frames = frames;
  VideoCube target = gen_synthetic(spec);

  Tensor3<T> t;
  t.resize(frames, out_h, out_w);
  for (std::size_t i = 0; i < t.v.size(); ++i)
    t.v[i] = static_cast<T>(target.data[i]);

  DVPWorkspace<T> ws;
  DVPGrads<T> grads;
  grads.match(model);
  AdamState<T> adam;

  const auto t0 = std::chrono::steady_clock::now();
  for (int it = 0; it < iters; ++it) {
    loss_and_grad(model, ws, &t, nullptr, nullptr, 0.0, grads);
    adam_step(model, grads, adam, 0.01);
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return dt / iters;
}

int main() {
  struct Case {
    int h, w, B, ch;
  };
  const Case cases[] = {
      {20, 20, 8, 8}, {40, 40, 8, 8}, {80, 80, 8, 8},
      {20, 20, 8, 16}, {40, 40, 8, 16}, {80, 80, 8, 16},
  };
  std::printf("%-18s %-12s %-12s\n", "size", "f32 s/iter", "f64 s/iter");
  for (const auto& c : cases) {
    const double f = bench<float>(c.h, c.w, c.B, c.ch, 30);
    const double d = bench<double>(c.h, c.w, c.B, c.ch, 30);
    std::printf("%3dx%-3d B=%d ch=%-3d %-12.5f %-12.5f\n", c.h, c.w, c.B, c.ch, f, d);
  }
  return 0;
}
