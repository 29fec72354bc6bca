// Experiment harness: profiles, single recoveries, parameter sweeps, the
// denoising demo and CSV emission. Every emitted CSV is a deterministic
// function of the config; wall-clock timings are zeroed unless explicitly
// requested so that repeated runs are byte-identical.

#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scibdvp/bdvp.hpp"
#include "scibdvp/core.hpp"
#include "scibdvp/io.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/metrics.hpp"
#include "scibdvp/solver.hpp"
#include "scibdvp/synthetic.hpp"
#include "scibdvp/theory.hpp"

namespace scibdvp::harness {

// ---- deterministic CSV formatting ------------------------------------------

namespace csv {

inline std::string num(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline void write_lines(const std::string& path,
                        const std::vector<std::string>& lines) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    for (const auto& l : lines) out << l << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace csv

// ---- profiles ---------------------------------------------------------------

// Desk profile: the CPU-scale regime (<= 64x64x8 frames, <= 32 channels,
// inner 200/200/400, T = 10 noise-free / 8 noisy). Full profile: the
// benchmark regime (128 channels, inner 2000/2000/4000 noise-free or
// 900/900/1800 noisy, T = 75 / 35).
struct Profile {
  int channels = 8;
  int inner_base_noisefree = 200;
  int inner_base_noisy = 200;
  int outer_noisefree = 10;
  int outer_noisy = 8;
  double lr = 0.005;  // small decoders destabilize at the full-size 0.01
};

inline Profile desk_profile() { return {8, 200, 200, 10, 8, 0.005}; }
inline Profile full_profile() { return {128, 2000, 900, 75, 35, 0.01}; }

// ---- experiment config -------------------------------------------------------

struct ExperimentConfig {
  // input: either an SCIC cube on disk or a synthetic generator spec
  std::string video_path;
  std::optional<SyntheticSpec> synthetic;

  // mask policy: explicit SCIC mask, or Bernoulli(p) from the seed
  std::string mask_path;
  double p = 0.5;
  std::uint64_t mask_instance = 0;

  double sigma = 0.0;  // measurement noise, 0-255 scale
  SolverConfig solver;
  std::optional<DescentMode> mode;  // default: GAP when sigma==0, else GD
  std::optional<double> mu;         // default: 1.0 for GAP, 0.1 for GD
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool desk = true;
  bool timings = false;
  int jobs = 0;  // worker pool width; 0 = hardware concurrency
};

inline VideoCube load_input_video(const ExperimentConfig& cfg) {
  if (!cfg.video_path.empty()) return io::load_cube(cfg.video_path);
  if (cfg.synthetic) return gen_synthetic(*cfg.synthetic);
  throw std::invalid_argument("experiment: no input video configured");
}

// Resolves mode/step-size/iteration defaults against the profile and noise
// level; explicit settings always win.
inline SolverConfig resolve_solver(const ExperimentConfig& cfg, int n1, int n2,
                                   int frames) {
  SolverConfig s = cfg.solver;
  const Profile prof = cfg.desk ? desk_profile() : full_profile();
  s.mode = cfg.mode.value_or(cfg.sigma == 0.0 ? DescentMode::GAP : DescentMode::GD);
  s.mu = cfg.mu.value_or(s.mode == DescentMode::GD ? 0.1 : 1.0);
  if (s.outer_iters <= 0)
    s.outer_iters = cfg.sigma == 0.0 ? prof.outer_noisefree : prof.outer_noisy;
  if (s.bagged.channels <= 0) s.bagged.channels = prof.channels;
  if (s.bagged.lr <= 0.0) s.bagged.lr = prof.lr;
  if (s.bagged.scales.empty()) s.bagged.scales = default_scales(n1, n2);
  if (s.bagged.inner_iters.empty())
    s.bagged.inner_iters = default_inner_iters(
        s.bagged.scales,
        cfg.sigma == 0.0 ? prof.inner_base_noisefree : prof.inner_base_noisy);
  s.bagged.seed = cfg.seed;
  (void)frames;
  return s;
}

struct PreparedRun {
  VideoCube truth;
  SensingOperator op;
  Measurement y;
  SolverConfig solver;
};

inline PreparedRun prepare_run(const ExperimentConfig& cfg) {
  PreparedRun run;
  run.truth = load_input_video(cfg);
  MaskCube mask;
  if (!cfg.mask_path.empty()) {
    mask = io::load_mask(cfg.mask_path);
    if (mask.n1 != run.truth.n1 || mask.n2 != run.truth.n2 ||
        mask.frames != run.truth.frames)
      throw std::invalid_argument("experiment: mask/video shape mismatch");
  } else {
    mask = gen_mask(run.truth.n1, run.truth.n2, run.truth.frames, cfg.p,
                    cfg.seed, cfg.mask_instance);
  }
  run.op = make_operator(std::move(mask));
  run.y = forward(run.op, run.truth);
  if (cfg.sigma > 0.0)
    run.y = add_noise(run.y, cfg.sigma, cfg.seed, cfg.mask_instance);
  run.solver = resolve_solver(cfg, run.truth.n1, run.truth.n2, run.truth.frames);
  return run;
}

// ---- trace / metrics serialization -------------------------------------------

inline std::vector<std::string> trace_csv_lines(const RunTrace& trace,
                                                bool timings) {
  std::vector<std::string> lines;
  lines.push_back("iter,residual,psnr,ssim,psnr_vs_meanframe,seconds");
  for (const auto& r : trace.rows) {
    std::ostringstream os;
    os << r.iter << ',' << csv::num(r.residual, "%.9e") << ','
       << csv::num(r.psnr) << ',' << csv::num(r.ssim) << ','
       << csv::num(r.psnr_vs_meanframe) << ','
       << csv::num(timings ? r.seconds : 0.0, "%.3f");
    lines.push_back(os.str());
  }
  return lines;
}

struct RunResult {
  VideoCube recon;
  RunTrace trace;
  double psnr = 0.0;
  double ssim = 0.0;
  double psnr_vs_meanframe = 0.0;
  double residual = 0.0;
};

inline RunResult execute_run(const PreparedRun& run) {
  RunResult res;
  if (run.solver.mode == DescentMode::E2E) {
    res.recon = recover_e2e(run.y, run.op, run.solver);
  } else {
    auto [x, trace] = recover(run.y, run.op, run.solver, &run.truth);
    res.recon = std::move(x);
    res.trace = std::move(trace);
  }
  const VideoCube clamped = clamped01(res.recon);
  const MeanFrameReport mf = mean_frame_analysis(run.truth, clamped);
  res.psnr = mf.psnr_x_xhat;
  res.ssim = ssim(run.truth, clamped);
  res.psnr_vs_meanframe = mf.psnr_xhat_meanframe;
  res.residual = residual_norm(run.op, run.y, res.recon);
  return res;
}

// Measure (optionally with noise), recover, and write reconstruction SCIC
// plus trace and metrics CSVs under cfg.out_dir.
inline RunResult run_recover(const ExperimentConfig& cfg) {
  const PreparedRun run = prepare_run(cfg);  // inputs validated before any output
  std::filesystem::create_directories(cfg.out_dir);
  RunResult res = execute_run(run);

  io::save_cube(cfg.out_dir + "/recon.scic", res.recon);
  csv::write_lines(cfg.out_dir + "/trace.csv",
                   trace_csv_lines(res.trace, cfg.timings));
  std::vector<std::string> lines;
  lines.push_back("psnr,ssim,psnr_vs_meanframe,residual");
  lines.push_back(csv::num(res.psnr) + "," + csv::num(res.ssim) + "," +
                  csv::num(res.psnr_vs_meanframe) + "," +
                  csv::num(res.residual, "%.9e"));
  csv::write_lines(cfg.out_dir + "/metrics.csv", lines);
  return res;
}

// ---- bounded worker pool ------------------------------------------------------

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  const int workers = static_cast<int>(std::min<std::size_t>(jobs, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// ---- sweeps -------------------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  double sigma = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double psnr_vs_meanframe = 0.0;
};

// One full recovery per p, fresh mask and noise per (p, seed).
inline std::vector<SweepRow> sweep_mask(const ExperimentConfig& base,
                                        const std::vector<double>& p_list) {
  std::vector<SweepRow> rows(p_list.size());
  detail::parallel_for(p_list.size(), base.jobs, [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.p = p_list[i];
    cfg.mask_instance = stream_instance(base.mask_instance, i + 1);
    const RunResult res = execute_run(prepare_run(cfg));
    rows[i] = {p_list[i], base.sigma, res.psnr, res.ssim, res.psnr_vs_meanframe};
  });
  return rows;
}

inline void write_sweep_mask_csv(const std::string& path,
                                 const std::vector<SweepRow>& rows) {
  std::vector<std::string> lines;
  lines.push_back("p,sigma,psnr,ssim,psnr_vs_meanframe");
  for (const auto& r : rows)
    lines.push_back(csv::num(r.value, "%.3f") + "," + csv::num(r.sigma, "%.3f") +
                    "," + csv::num(r.psnr) + "," + csv::num(r.ssim) + "," +
                    csv::num(r.psnr_vs_meanframe));
  csv::write_lines(path, lines);
}

// Recoveries over a list of skip weights (mask and noise held fixed).
inline std::vector<std::pair<double, double>> sweep_alpha(
    const ExperimentConfig& base, const std::vector<double>& alphas) {
  std::vector<std::pair<double, double>> rows(alphas.size());
  detail::parallel_for(alphas.size(), base.jobs, [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.solver.alpha = alphas[i];
    const RunResult res = execute_run(prepare_run(cfg));
    rows[i] = {alphas[i], res.psnr};
  });
  return rows;
}

inline std::vector<std::pair<double, double>> sweep_omega(
    const ExperimentConfig& base, const std::vector<double>& omegas) {
  std::vector<std::pair<double, double>> rows(omegas.size());
  detail::parallel_for(omegas.size(), base.jobs, [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.solver.bagged.omega = omegas[i];
    const RunResult res = execute_run(prepare_run(cfg));
    rows[i] = {omegas[i], res.psnr};
  });
  return rows;
}

inline void write_value_psnr_csv(const std::string& path, const char* value_name,
                                 const std::vector<std::pair<double, double>>& rows) {
  std::vector<std::string> lines;
  lines.push_back(std::string(value_name) + ",psnr");
  for (const auto& [v, p] : rows)
    lines.push_back(csv::num(v, "%.4f") + "," + csv::num(p));
  csv::write_lines(path, lines);
}

// ---- denoising demo ------------------------------------------------------------

inline constexpr std::uint64_t kDenoiseInstance = 0xdd01;

struct DenoiseTrace {
  std::vector<std::string> scale_names;             // e.g. "scale_16x16"
  std::vector<std::vector<double>> psnr_per_scale;  // [scale][iter]
  std::vector<double> psnr_bagged;                  // [iter]
};

// Unsupervised denoising of y = x + z: every constituent DVP trains in
// lockstep against the noisy cube (no masking), and each iteration records
// the PSNR of each per-scale estimate and of their average. A scale stops
// stepping once it exhausts its own inner-iteration budget (its estimate
// freezes); the trace runs to the longest budget. `iters` caps all budgets
// when positive.
inline DenoiseTrace denoise_demo(const VideoCube& x, double sigma,
                                 const BaggedConfig& cfg, int iters = 0) {
  if (cfg.scales.empty()) throw std::invalid_argument("denoise_demo: no scales");
  std::vector<int> budgets(cfg.scales.size());
  for (std::size_t k = 0; k < budgets.size(); ++k)
    budgets[k] = iters > 0 ? iters
                           : scibdvp::detail::iters_for_scale(cfg, static_cast<int>(k));
  const int horizon = *std::max_element(budgets.begin(), budgets.end());
  if (horizon < 1) throw std::invalid_argument("denoise_demo: empty budgets");

  VideoCube noisy = x;
  if (sigma > 0.0) {
    CounterRng rng(cfg.seed, Stream::Noise, kDenoiseInstance);
    const double sd = sigma / 255.0;
    for (double& v : noisy.data) v += sd * rng.next_gaussian();
  }

  using T = double;
  struct Unit {
    DVPModel<T> model;
    DVPWorkspace<T> ws;
    DVPGrads<T> grads;
    AdamState<T> adam;
    Tensor3<T> target;
    Region rg;
    std::uint64_t instance = 0;
    int pad_h = 0, pad_w = 0;
    int attempt = 0;
    TrainingStallGuard<double> stall;
  };
  std::vector<std::vector<Unit>> units(cfg.scales.size());

  for (std::size_t k = 0; k < cfg.scales.size(); ++k) {
    const ScaleSpec& sc = cfg.scales[k];
    const auto regions = partition(x.n1, x.n2, sc);
    units[k].resize(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
      Unit& u = units[k][i];
      u.rg = regions[i];
      u.pad_h = sc.pad_h();
      u.pad_w = sc.pad_w();
      const VideoCube padded = mirror_pad(noisy.crop(u.rg), u.pad_h, u.pad_w);
      u.target.resize(padded.frames, padded.n1, padded.n2);
      for (std::size_t j = 0; j < u.target.v.size(); ++j)
        u.target.v[j] = static_cast<T>(padded.data[j]);
      const DVPArchitecture arch =
          scibdvp::detail::patch_arch(padded.n1, padded.n2, x.frames, cfg);
      u.instance =
          stream_instance(kDenoiseInstance, static_cast<std::uint64_t>(k), i);
      u.model = init_dvp<T>(arch, cfg.seed, u.instance);
      u.grads.match(u.model);
    }
  }

  DenoiseTrace trace;
  for (const auto& sc : cfg.scales)
    trace.scale_names.push_back("scale_" + std::to_string(sc.patch_h) + "x" +
                                std::to_string(sc.patch_w));
  trace.psnr_per_scale.resize(cfg.scales.size());

  std::vector<VideoCube> estimates(cfg.scales.size());
  for (auto& e : estimates) e = VideoCube(x.n1, x.n2, x.frames);

  for (int it = 0; it < horizon; ++it) {
    for (std::size_t k = 0; k < units.size(); ++k) {
      if (it >= budgets[k]) continue;  // budget exhausted: estimate frozen
      for (Unit& u : units[k]) {
        double loss =
            loss_and_grad(u.model, u.ws, &u.target, nullptr, nullptr, 0.0, u.grads);
        // rescue collapsed decoders from the next derived seed
        if (u.attempt < 2 &&
            (u.stall.frozen(loss, static_cast<int>(u.adam.step)) ||
             (it % 50 == 49 && network_dead(u.ws)))) {
          ++u.attempt;
          u.model = init_dvp<T>(u.model.arch, cfg.seed,
                                stream_instance(u.instance, 0x7e7a,
                                                static_cast<std::uint64_t>(u.attempt)));
          u.adam = AdamState<T>{};
          u.stall = TrainingStallGuard<double>{};
          loss_and_grad(u.model, u.ws, &u.target, nullptr, nullptr, 0.0, u.grads);
        }
        estimates[k].paste(u.rg, crop_pad(to_cube(u.ws.output), u.pad_h, u.pad_w));
        adam_step(u.model, u.grads, u.adam,
                  warmed_lr(cfg.lr / static_cast<double>(1 << u.attempt),
                            static_cast<int>(u.adam.step), cfg.lr_warmup));
      }
    }
    for (std::size_t k = 0; k < estimates.size(); ++k)
      trace.psnr_per_scale[k].push_back(psnr(x, clamped01(estimates[k])));
    trace.psnr_bagged.push_back(psnr(x, clamped01(bag(estimates))));
  }
  return trace;
}

inline void write_denoise_csv(const std::string& path, const DenoiseTrace& t) {
  std::vector<std::string> lines;
  std::string head = "iter";
  for (const auto& n : t.scale_names) head += ",psnr_" + n;
  head += ",psnr_bagged";
  lines.push_back(head);
  for (std::size_t i = 0; i < t.psnr_bagged.size(); ++i) {
    std::string row = std::to_string(i + 1);
    for (const auto& s : t.psnr_per_scale) row += "," + csv::num(s[i]);
    row += "," + csv::num(t.psnr_bagged[i]);
    lines.push_back(row);
  }
  csv::write_lines(path, lines);
}

// ---- theory CSV -----------------------------------------------------------------

// Grid of the three bounds over p plus a summary row holding each argmin.
inline std::vector<std::string> theory_bounds_csv(theory::BoundInputs in,
                                                  int grid_points) {
  if (grid_points < 3) throw std::invalid_argument("theory_bounds: grid >= 3");
  std::vector<std::string> lines;
  lines.push_back("p,bound_noisefree,bound_noisy_recon,bound_noisy_meanframe");
  std::vector<double> grid;
  for (int i = 1; i <= grid_points; ++i)
    grid.push_back(static_cast<double>(i) / (grid_points + 1));
  auto nf = [&](double p) { auto c = in; c.p = p; return theory::bound_noisefree(c); };
  auto nr = [&](double p) { auto c = in; c.p = p; return theory::bound_noisy_recon(c); };
  auto mf = [&](double p) { auto c = in; c.p = p; return theory::bound_noisy_meanframe(c); };
  for (double p : grid) {
    lines.push_back(csv::num(p, "%.6f") + "," + csv::num(nf(p), "%.9e") + "," +
                    csv::num(nr(p), "%.9e") + "," + csv::num(mf(p), "%.9e"));
  }
  const auto [p_nf, v_nf] = theory::argmin_p(nf, grid);
  const auto [p_nr, v_nr] = theory::argmin_p(nr, grid);
  const auto [p_mf, v_mf] = theory::argmin_p(mf, grid);
  (void)v_nf; (void)v_nr; (void)v_mf;
  lines.push_back("argmin," + csv::num(p_nf) + "," + csv::num(p_nr) + "," +
                  csv::num(p_mf));
  return lines;
}

}  // namespace scibdvp::harness
