// Command-line front end: mask/video generation, measurement, recovery,
// parameter sweeps, the denoising demo, theory-bound tables and SCIC/PGM
// conversion. Every subcommand accepts --config FILE (flat key=value text,
// same keys as the flags; flags override the file).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scibdvp/harness.hpp"

using namespace scibdvp;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

// Shared experiment options; the synthetic video spec string has the form
//   synth:<kind>:<n1>:<n2>:<B>:<amplitude>:<seed>
struct CommonOpts {
  std::string config_file;
  std::string video;
  std::string mask_file;
  double p = 0.5;
  double sigma = 0.0;
  std::string mode = "auto";  // auto|gap|gd|e2e
  double mu = -1.0;           // <0 -> per-mode default
  double alpha = 0.5;
  double omega = 0.1;
  std::string scales;       // e.g. "16,32,64"
  std::string inner_iters;  // e.g. "200,200,400"
  int outer_iters = 0;      // 0 -> profile default
  int channels = 0;         // 0 -> profile default
  double lr = 0.0;  // 0 = profile default
  int lr_warmup = 50;
  std::uint64_t seed = 0;
  bool full = false;
  std::string out_dir = "out";
  bool timings = false;
  int jobs = 0;
  std::string mask_policy = "shared";  // shared|per-video
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--video", o.video,
                  "input video: SCIC path or synth:<kind>:<n1>:<n2>:<B>:<amp>:<seed>");
  cmd->add_option("--mask", o.mask_file, "SCIC mask path (overrides --p)");
  cmd->add_option("--p", o.p, "mask Bernoulli parameter");
  cmd->add_option("--sigma", o.sigma, "measurement noise sigma on the 0-255 scale");
  cmd->add_option("--mode", o.mode, "descent mode: auto|gap|gd|e2e");
  cmd->add_option("--mu", o.mu, "descent step size (default 1.0 gap, 0.1 gd)");
  cmd->add_option("--alpha", o.alpha, "skip-connection weight in [0,1]");
  cmd->add_option("--omega", o.omega, "measurement-loss weight");
  cmd->add_option("--scales", o.scales, "patch sizes, comma separated");
  cmd->add_option("--inner-iters", o.inner_iters, "per-scale DVP iterations");
  cmd->add_option("--outer-iters", o.outer_iters, "outer PGD iterations");
  cmd->add_option("--channels", o.channels, "DVP feature channels");
  cmd->add_option("--lr", o.lr, "DVP learning rate (0 = profile default)");
  cmd->add_option("--lr-warmup", o.lr_warmup, "linear lr ramp steps");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_flag("--full,!--desk", o.full, "full (benchmark) profile vs desk profile");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_flag("--timings", o.timings, "record wall time in trace CSVs (non-deterministic)");
  cmd->add_option("--jobs", o.jobs, "sweep worker pool width (0 = hardware)");
  cmd->add_option("--mask-policy", o.mask_policy, "sweep masks: shared|per-video");
  cmd->add_option("--config", o.config_file,
                  "flat key=value config file; explicit flags override it");
}

// Expands `--config FILE` into the flags it mirrors. Lines are `key=value`
// (or `key value`), '#' starts a comment; a key present on the command line
// wins over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> out;
  std::size_t insert_at = std::string::npos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw std::runtime_error("--config needs a file");
      path = args[++i];
      if (insert_at == std::string::npos) insert_at = out.size();
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
      if (insert_at == std::string::npos) insert_at = out.size();
    } else {
      out.push_back(a);
    }
  }
  if (path.empty()) return out;

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find(' ');
    if (sep == std::string::npos)
      throw std::runtime_error("config line without key=value: " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, sep));
    const std::string value = trim(line.substr(sep + 1));
    if (key.empty()) throw std::runtime_error("config line without key: " + line);
    const std::string flag = "--" + key;
    bool overridden = false;
    for (const auto& a : out)
      if (a == flag || a.rfind(flag + "=", 0) == 0) overridden = true;
    if (!overridden) {
      injected.push_back(flag);
      injected.push_back(value);
    }
  }
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(insert_at),
             injected.begin(), injected.end());
  return out;
}

SyntheticSpec parse_synth(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  if (parts.size() != 7 || parts[0] != "synth")
    throw CLI::ValidationError("--video",
                               "expected synth:<kind>:<n1>:<n2>:<B>:<amp>:<seed>");
  SyntheticSpec spec;
  spec.kind = synthetic_kind_from_name(parts[1]);
  spec.n1 = std::stoi(parts[2]);
  spec.n2 = std::stoi(parts[3]);
  spec.frames = std::stoi(parts[4]);
  spec.amplitude = std::stod(parts[5]);
  spec.seed = std::stoull(parts[6]);
  return spec;
}

harness::ExperimentConfig to_config(const CommonOpts& o) {
  harness::ExperimentConfig cfg;
  if (o.video.rfind("synth:", 0) == 0)
    cfg.synthetic = parse_synth(o.video);
  else
    cfg.video_path = o.video;
  cfg.mask_path = o.mask_file;
  cfg.p = o.p;
  cfg.sigma = o.sigma;
  cfg.seed = o.seed;
  cfg.out_dir = o.out_dir;
  cfg.desk = !o.full;
  cfg.timings = o.timings;
  cfg.jobs = o.jobs;
  if (o.mode == "gap") cfg.mode = DescentMode::GAP;
  else if (o.mode == "gd") cfg.mode = DescentMode::GD;
  else if (o.mode == "e2e") cfg.mode = DescentMode::E2E;
  else if (o.mode != "auto")
    throw CLI::ValidationError("--mode", "must be auto, gap, gd or e2e");
  if (o.mu > 0.0) cfg.mu = o.mu;
  cfg.solver.alpha = o.alpha;
  cfg.solver.outer_iters = o.outer_iters;  // 0 resolves to profile default
  cfg.solver.bagged.omega = o.omega;
  cfg.solver.bagged.lr = o.lr;
  cfg.solver.bagged.lr_warmup = o.lr_warmup;
  cfg.solver.bagged.channels = o.channels;
  if (!o.scales.empty())
    for (int s : parse_int_list(o.scales))
      cfg.solver.bagged.scales.push_back({s, s});
  if (!o.inner_iters.empty())
    cfg.solver.bagged.inner_iters = parse_int_list(o.inner_iters);
  if (o.mask_policy == "per-video") {
    cfg.mask_instance = cfg.synthetic ? cfg.synthetic->seed
                                      : std::hash<std::string>{}(cfg.video_path);
  } else if (o.mask_policy != "shared") {
    throw CLI::ValidationError("--mask-policy", "must be shared or per-video");
  }
  return cfg;
}

// ---- PGM conversion (P5, 8-bit) -------------------------------------------

VideoCube pgm_dir_to_cube(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".pgm") files.push_back(e.path());
  if (files.empty()) throw std::runtime_error("convert: no .pgm frames in " + dir);
  std::sort(files.begin(), files.end());

  VideoCube cube;
  for (std::size_t f = 0; f < files.size(); ++f) {
    std::ifstream in(files[f], std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    in.get();
    if (magic != "P5" || maxv != 255 || w < 1 || h < 1)
      throw std::runtime_error("convert: " + files[f].string() +
                               " is not an 8-bit binary PGM");
    if (f == 0) cube = VideoCube(h, w, static_cast<int>(files.size()));
    if (h != cube.n1 || w != cube.n2)
      throw std::runtime_error("convert: frame size mismatch at " + files[f].string());
    std::vector<char> buf(static_cast<std::size_t>(w) * h);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("convert: truncated " + files[f].string());
    double* dst = cube.frame(static_cast<int>(f));
    for (std::size_t j = 0; j < buf.size(); ++j)
      dst[j] = static_cast<std::uint8_t>(buf[j]) / 255.0;
  }
  return cube;
}

void cube_to_pgm_dir(const VideoCube& cube, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (int f = 0; f < cube.frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.pgm", f);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    out << "P5\n" << cube.n2 << " " << cube.n1 << "\n255\n";
    const double* src = cube.frame(f);
    for (std::size_t j = 0; j < cube.pixels(); ++j) {
      const int v = static_cast<int>(std::lround(clamp01(src[j]) * 255.0));
      out.put(static_cast<char>(v));
    }
  }
}

VideoCube require_video(const harness::ExperimentConfig& cfg) {
  return harness::load_input_video(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snapshot-compressive-imaging lab: bagged video-prior recovery"};
  app.require_subcommand(1);

  CommonOpts o;

  // gen-mask
  int gm_n1 = 64, gm_n2 = 64, gm_B = 8;
  auto* gen_mask_cmd = app.add_subcommand("gen-mask", "generate a Bernoulli(p) mask cube");
  gen_mask_cmd->add_option("--n1", gm_n1);
  gen_mask_cmd->add_option("--n2", gm_n2);
  gen_mask_cmd->add_option("--B", gm_B);
  add_common(gen_mask_cmd, o);

  // gen-video
  std::string gv_kind = "moving_blob";
  int gv_n1 = 64, gv_n2 = 64, gv_B = 8;
  double gv_amp = 2.0;
  auto* gen_video_cmd = app.add_subcommand("gen-video", "generate a synthetic video cube");
  gen_video_cmd->add_option("--kind", gv_kind, "moving_blob|shifting_gradient|bouncing_rects");
  gen_video_cmd->add_option("--n1", gv_n1);
  gen_video_cmd->add_option("--n2", gv_n2);
  gen_video_cmd->add_option("--B", gv_B);
  gen_video_cmd->add_option("--amplitude", gv_amp, "motion in pixels/frame");
  add_common(gen_video_cmd, o);

  // measure
  auto* measure_cmd = app.add_subcommand("measure", "apply the forward model (plus optional noise)");
  add_common(measure_cmd, o);

  // recover
  std::string rec_y, rec_gt;
  auto* recover_cmd = app.add_subcommand("recover", "run the full recovery");
  recover_cmd->add_option("--y", rec_y, "measurement SCIC (default: measure --video internally)");
  recover_cmd->add_option("--gt", rec_gt, "ground-truth cube for trace metrics");
  add_common(recover_cmd, o);

  // sweeps
  std::string p_list = "0.2,0.3,0.4,0.5,0.6,0.7,0.8";
  auto* sweep_mask_cmd = app.add_subcommand("sweep-mask", "recovery PSNR over a p grid");
  sweep_mask_cmd->add_option("--p-list", p_list);
  add_common(sweep_mask_cmd, o);

  std::string alpha_list = "0.1,0.3,0.5,0.7,1.0";
  auto* sweep_alpha_cmd = app.add_subcommand("sweep-alpha", "recovery PSNR over skip weights");
  sweep_alpha_cmd->add_option("--alpha-list", alpha_list);
  add_common(sweep_alpha_cmd, o);

  std::string omega_list = "0,0.05,0.1,0.5";
  auto* sweep_omega_cmd = app.add_subcommand("sweep-omega", "recovery PSNR over measurement-loss weights");
  sweep_omega_cmd->add_option("--omega-list", omega_list);
  add_common(sweep_omega_cmd, o);

  // denoise-demo
  int dd_iters = 300;
  auto* denoise_cmd = app.add_subcommand("denoise-demo", "bagging effect on unsupervised denoising");
  denoise_cmd->add_option("--iters", dd_iters,
                          "uniform budget; --inner-iters sets per-scale budgets");
  add_common(denoise_cmd, o);

  // theory-bounds
  double tb_n = 65536, tb_k = 1000, tb_delta = 0.01, tb_L = 1.0, tb_rho = kRho,
         tb_sigma_z = 0.0;
  int tb_B = 8, tb_grid = 99;
  auto* theory_cmd = app.add_subcommand("theory-bounds", "tabulate the recovery bounds over p");
  theory_cmd->add_option("--n", tb_n, "pixel count");
  theory_cmd->add_option("--B", tb_B, "frame count");
  theory_cmd->add_option("--k", tb_k, "DVP parameter count");
  theory_cmd->add_option("--delta", tb_delta, "representation error");
  theory_cmd->add_option("--L", tb_L, "Lipschitz constant");
  theory_cmd->add_option("--rho", tb_rho, "peak amplitude");
  theory_cmd->add_option("--sigma-z", tb_sigma_z, "noise level in [0,1] units");
  theory_cmd->add_option("--grid", tb_grid, "number of p grid points");
  add_common(theory_cmd, o);

  // convert
  std::string cv_frames, cv_cube;
  auto* convert_cmd = app.add_subcommand("convert", "PGM frame folder <-> SCIC cube");
  convert_cmd->add_option("--frames", cv_frames, "directory of P5 .pgm frames to pack");
  convert_cmd->add_option("--cube", cv_cube, "SCIC cube to unpack into .pgm frames");
  add_common(convert_cmd, o);

  std::vector<std::string> args;
  try {
    args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::vector<const char*> cargs;
  cargs.push_back(argv[0]);
  for (const auto& a : args) cargs.push_back(a.c_str());
  CLI11_PARSE(app, static_cast<int>(cargs.size()),
              const_cast<char**>(cargs.data()));

  try {
    std::filesystem::create_directories(o.out_dir);
    const harness::ExperimentConfig cfg = to_config(o);

    if (gen_mask_cmd->parsed()) {
      const MaskCube m = gen_mask(gm_n1, gm_n2, gm_B, o.p, o.seed);
      io::save_mask(o.out_dir + "/mask.scic", m);
      std::printf("wrote %s/mask.scic (%dx%dx%d, p=%g, seed=%llu)\n",
                  o.out_dir.c_str(), gm_n1, gm_n2, gm_B, o.p,
                  static_cast<unsigned long long>(o.seed));
    } else if (gen_video_cmd->parsed()) {
      SyntheticSpec spec;
      spec.kind = synthetic_kind_from_name(gv_kind);
      spec.n1 = gv_n1;
      spec.n2 = gv_n2;
      spec.frames = gv_B;
      spec.amplitude = gv_amp;
      spec.seed = o.seed;
      io::save_cube(o.out_dir + "/video.scic", gen_synthetic(spec));
      std::printf("wrote %s/video.scic (%s %dx%dx%d)\n", o.out_dir.c_str(),
                  gv_kind.c_str(), gv_n1, gv_n2, gv_B);
    } else if (measure_cmd->parsed()) {
      const harness::PreparedRun run = harness::prepare_run(cfg);
      io::save_measurement(o.out_dir + "/y.scic", run.y);
      io::save_mask(o.out_dir + "/mask.scic", run.op.mask);
      std::printf("wrote %s/y.scic and %s/mask.scic (sigma=%g)\n",
                  o.out_dir.c_str(), o.out_dir.c_str(), o.sigma);
    } else if (recover_cmd->parsed()) {
      if (!rec_y.empty()) {
        // measurement given on disk; mask must be given too
        if (o.mask_file.empty())
          throw std::runtime_error("recover --y requires --mask");
        const Measurement y = io::load_measurement(rec_y);
        const SensingOperator op = make_operator(io::load_mask(o.mask_file));
        harness::ExperimentConfig c2 = cfg;
        c2.sigma = y.sigma;
        const SolverConfig solver = harness::resolve_solver(c2, y.n1, y.n2, op.frames());
        VideoCube gt;
        const VideoCube* gt_ptr = nullptr;
        if (!rec_gt.empty()) {
          gt = io::load_cube(rec_gt);
          gt_ptr = &gt;
        }
        if (solver.mode == DescentMode::E2E) {
          const VideoCube recon = recover_e2e(y, op, solver);
          io::save_cube(o.out_dir + "/recon.scic", recon);
        } else {
          auto [recon, trace] = recover(y, op, solver, gt_ptr);
          io::save_cube(o.out_dir + "/recon.scic", recon);
          harness::csv::write_lines(
              o.out_dir + "/trace.csv",
              harness::trace_csv_lines(trace, o.timings));
        }
        std::printf("wrote %s/recon.scic\n", o.out_dir.c_str());
      } else {
        const harness::RunResult res = harness::run_recover(cfg);
        std::printf("psnr=%.3f ssim=%.4f (outputs in %s)\n", res.psnr, res.ssim,
                    o.out_dir.c_str());
      }
    } else if (sweep_mask_cmd->parsed()) {
      const auto rows = harness::sweep_mask(cfg, parse_list(p_list));
      harness::write_sweep_mask_csv(o.out_dir + "/sweep_mask.csv", rows);
      std::printf("wrote %s/sweep_mask.csv (%zu rows)\n", o.out_dir.c_str(),
                  rows.size());
    } else if (sweep_alpha_cmd->parsed()) {
      const auto rows = harness::sweep_alpha(cfg, parse_list(alpha_list));
      harness::write_value_psnr_csv(o.out_dir + "/sweep_alpha.csv", "alpha", rows);
      std::printf("wrote %s/sweep_alpha.csv (%zu rows)\n", o.out_dir.c_str(),
                  rows.size());
    } else if (sweep_omega_cmd->parsed()) {
      const auto rows = harness::sweep_omega(cfg, parse_list(omega_list));
      harness::write_value_psnr_csv(o.out_dir + "/sweep_omega.csv", "omega", rows);
      std::printf("wrote %s/sweep_omega.csv (%zu rows)\n", o.out_dir.c_str(),
                  rows.size());
    } else if (denoise_cmd->parsed()) {
      const VideoCube x = require_video(cfg);
      SolverConfig solver = harness::resolve_solver(cfg, x.n1, x.n2, x.frames);
      const auto trace = harness::denoise_demo(
          x, o.sigma, solver.bagged, o.inner_iters.empty() ? dd_iters : 0);
      harness::write_denoise_csv(o.out_dir + "/denoise.csv", trace);
      std::printf("wrote %s/denoise.csv (%d iterations)\n", o.out_dir.c_str(),
                  dd_iters);
    } else if (theory_cmd->parsed()) {
      theory::BoundInputs in;
      in.n = tb_n;
      in.frames = tb_B;
      in.k = tb_k;
      in.delta = tb_delta;
      in.lipschitz = tb_L;
      in.rho = tb_rho;
      in.sigma_z = tb_sigma_z;
      harness::csv::write_lines(o.out_dir + "/theory_bounds.csv",
                                harness::theory_bounds_csv(in, tb_grid));
      std::printf("wrote %s/theory_bounds.csv\n", o.out_dir.c_str());
    } else if (convert_cmd->parsed()) {
      if (!cv_frames.empty()) {
        io::save_cube(o.out_dir + "/video.scic", pgm_dir_to_cube(cv_frames));
        std::printf("wrote %s/video.scic\n", o.out_dir.c_str());
      } else if (!cv_cube.empty()) {
        cube_to_pgm_dir(io::load_cube(cv_cube), o.out_dir);
        std::printf("wrote frames under %s\n", o.out_dir.c_str());
      } else {
        throw std::runtime_error("convert: need --frames or --cube");
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
