#include <catch2/catch.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "scibdvp/harness.hpp"

using namespace scibdvp;
using harness::ExperimentConfig;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("harness_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

ExperimentConfig tiny_experiment(const std::string& out_dir) {
  ExperimentConfig cfg;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MovingBlob;
  spec.n1 = 32;
  spec.n2 = 32;
  spec.frames = 2;
  spec.seed = 4;
  cfg.synthetic = spec;
  cfg.p = 0.5;
  cfg.seed = 1;
  cfg.out_dir = out_dir;
  cfg.solver.outer_iters = 2;
  cfg.solver.bagged.scales = {{16, 16}, {32, 32}};
  cfg.solver.bagged.inner_iters = {30, 60};
  cfg.solver.bagged.channels = 6;
  return cfg;
}

}  // namespace

TEST_CASE("synthetic generators are deterministic, bounded and coherent") {
  for (auto kind : {SyntheticKind::MovingBlob, SyntheticKind::ShiftingGradient,
                    SyntheticKind::BouncingRects}) {
    SyntheticSpec spec;
    spec.kind = kind;
    spec.n1 = 32;
    spec.n2 = 32;
    spec.frames = 8;
    spec.seed = 9;
    const VideoCube a = gen_synthetic(spec);
    const VideoCube b = gen_synthetic(spec);
    REQUIRE(a.data == b.data);
    for (double v : a.data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("zero amplitude gives a static video") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MovingBlob;
  spec.n1 = 16;
  spec.n2 = 16;
  spec.frames = 4;
  spec.amplitude = 0.0;
  spec.seed = 2;
  const VideoCube x = gen_synthetic(spec);
  for (int f = 1; f < 4; ++f)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) REQUIRE(x.at(f, r, c) == x.at(0, r, c));
}

TEST_CASE("moving blob has steady frame-to-frame motion energy") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MovingBlob;
  spec.n1 = 64;
  spec.n2 = 64;
  spec.frames = 8;
  spec.amplitude = 2.0;
  spec.seed = 11;
  const VideoCube x = gen_synthetic(spec);
  std::vector<double> step_mse;
  for (int f = 1; f < 8; ++f) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.pixels(); ++j) {
      const double d = x.frame(f)[j] - x.frame(f - 1)[j];
      s += d * d;
    }
    step_mse.push_back(s / static_cast<double>(x.pixels()));
  }
  // pinned band from the generated corpus: motion energy is positive and
  // roughly constant (within 2x of the median step)
  double median = step_mse[step_mse.size() / 2];
  for (double v : step_mse) {
    REQUIRE(v > 1e-5);
    REQUIRE(v < 2.0 * median + 1e-9);
    REQUIRE(v > 0.5 * median);
  }
}

TEST_CASE("solver defaults follow the noise level") {
  ExperimentConfig cfg = tiny_experiment("unused");
  cfg.solver = SolverConfig{};
  cfg.sigma = 0.0;
  SolverConfig s0 = harness::resolve_solver(cfg, 64, 64, 8);
  REQUIRE(s0.mode == DescentMode::GAP);
  REQUIRE(s0.mu == 1.0);
  REQUIRE(s0.outer_iters == 10);
  REQUIRE(s0.bagged.inner_iters == std::vector<int>{200, 200, 400});

  cfg.sigma = 25.0;
  SolverConfig s1 = harness::resolve_solver(cfg, 64, 64, 8);
  REQUIRE(s1.mode == DescentMode::GD);
  REQUIRE(s1.mu == 0.1);
  REQUIRE(s1.outer_iters == 8);

  cfg.mode = DescentMode::GAP;  // explicit override wins
  SolverConfig s2 = harness::resolve_solver(cfg, 64, 64, 8);
  REQUIRE(s2.mode == DescentMode::GAP);
}

TEST_CASE("run_recover writes deterministic outputs") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp.file("run"));
  const auto res1 = harness::run_recover(cfg);
  REQUIRE(std::filesystem::exists(tmp.file("run/recon.scic")));
  REQUIRE(std::filesystem::exists(tmp.file("run/trace.csv")));
  REQUIRE(std::filesystem::exists(tmp.file("run/metrics.csv")));
  const std::string trace1 = slurp(tmp.file("run/trace.csv"));
  const std::string metrics1 = slurp(tmp.file("run/metrics.csv"));
  const std::string recon1 = slurp(tmp.file("run/recon.scic"));

  const auto res2 = harness::run_recover(cfg);
  REQUIRE(res1.psnr == res2.psnr);
  REQUIRE(slurp(tmp.file("run/trace.csv")) == trace1);
  REQUIRE(slurp(tmp.file("run/metrics.csv")) == metrics1);
  REQUIRE(slurp(tmp.file("run/recon.scic")) == recon1);

  // trace header and one row per outer iteration
  REQUIRE(trace1.rfind("iter,residual,psnr,ssim,psnr_vs_meanframe,seconds", 0) == 0);
  REQUIRE(std::count(trace1.begin(), trace1.end(), '\n') == 3);  // header + 2
}

TEST_CASE("missing mask file fails before any output is written") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp.file("nope"));
  cfg.mask_path = tmp.file("missing_mask.scic");
  REQUIRE_THROWS_AS(harness::run_recover(cfg), std::runtime_error);
  REQUIRE_FALSE(std::filesystem::exists(tmp.file("nope/recon.scic")));
  REQUIRE_FALSE(std::filesystem::exists(tmp.file("nope/trace.csv")));
}

TEST_CASE("sweep csv emission") {
  TempDir tmp;

  SECTION("empty list produces a header-only csv") {
    harness::write_value_psnr_csv(tmp.file("alpha.csv"), "alpha", {});
    REQUIRE(slurp(tmp.file("alpha.csv")) == "alpha,psnr\n");
    harness::write_sweep_mask_csv(tmp.file("mask.csv"), {});
    REQUIRE(slurp(tmp.file("mask.csv")) == "p,sigma,psnr,ssim,psnr_vs_meanframe\n");
  }

  SECTION("mask sweep emits one row per p and is deterministic") {
    ExperimentConfig cfg = tiny_experiment(tmp.file("sweep"));
    const std::vector<double> ps = {0.3, 0.6};
    const auto rows1 = harness::sweep_mask(cfg, ps);
    const auto rows2 = harness::sweep_mask(cfg, ps);
    REQUIRE(rows1.size() == 2);
    REQUIRE(rows1[0].value == 0.3);
    for (std::size_t i = 0; i < rows1.size(); ++i) {
      REQUIRE(rows1[i].psnr == rows2[i].psnr);
      REQUIRE(rows1[i].ssim == rows2[i].ssim);
    }
    harness::write_sweep_mask_csv(tmp.file("sweep.csv"), rows1);
    const std::string csv = slurp(tmp.file("sweep.csv"));
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);
  }
}

TEST_CASE("theory bounds csv has the grid plus an argmin summary row") {
  theory::BoundInputs in;
  in.n = 65536;
  in.frames = 8;
  in.k = 1000;
  in.delta = 0.01;
  in.lipschitz = 1.0;
  in.sigma_z = 0.1;
  const auto lines = harness::theory_bounds_csv(in, 9);
  REQUIRE(lines.size() == 11);  // header + 9 grid rows + argmin row
  REQUIRE(lines[0] == "p,bound_noisefree,bound_noisy_recon,bound_noisy_meanframe");
  REQUIRE(lines.back().rfind("argmin,", 0) == 0);
  // emission is deterministic
  REQUIRE(harness::theory_bounds_csv(in, 9) == lines);
}

TEST_CASE("denoise demo traces bagged and per-scale psnr in lockstep") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MovingBlob;
  spec.n1 = 32;
  spec.n2 = 32;
  spec.frames = 2;
  spec.seed = 6;
  const VideoCube x = gen_synthetic(spec);

  BaggedConfig cfg;
  cfg.scales = {{16, 16}, {32, 32}};
  cfg.channels = 6;
  cfg.inner_iters = {40, 40};
  cfg.lr = 0.005;
  cfg.seed = 2;
  const auto trace = harness::denoise_demo(x, 25.0, cfg, 40);
  REQUIRE(trace.psnr_bagged.size() == 40);
  REQUIRE(trace.psnr_per_scale.size() == 2);
  REQUIRE(trace.scale_names[0] == "scale_16x16");

  TempDir tmp;
  harness::write_denoise_csv(tmp.file("d.csv"), trace);
  const std::string csv = slurp(tmp.file("d.csv"));
  REQUIRE(csv.rfind("iter,psnr_scale_16x16,psnr_scale_32x32,psnr_bagged", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 41);
}
