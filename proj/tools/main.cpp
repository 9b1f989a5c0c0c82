#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "service.hpp"

using namespace ossireg;
using namespace ossireg::cli;

namespace {

RegistrationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

void add_ransac_flags(CLI::App* cmd, RansacOptions& r) {
  cmd->add_option("--ransac-iterations", r.iterations, "hypotheses to draw")
      ->capture_default_str();
  cmd->add_option("--inlier-threshold", r.inlier_threshold_px, "reprojection inlier threshold, px")
      ->capture_default_str();
  cmd->add_option("--min-sample", r.min_sample, "points per hypothesis")->capture_default_str();
  cmd->add_option("--min-inliers", r.min_inliers, "smallest accepted consensus")
      ->capture_default_str();
  cmd->add_option("--stop-ratio", r.stop_ratio, "early exit inlier fraction")
      ->capture_default_str();
}

void add_sampler_flags(CLI::App* cmd, PoseSampler& s) {
  cmd->add_option("--max-tilt", s.max_tilt_deg, "degrees")->capture_default_str();
  cmd->add_option("--max-spin", s.max_spin_deg, "degrees")->capture_default_str();
  cmd->add_option("--max-offset-x", s.max_offset_x_mm, "mm")->capture_default_str();
  cmd->add_option("--max-offset-y", s.max_offset_y_mm, "mm")->capture_default_str();
  cmd->add_option("--min-depth", s.min_depth_mm, "mm")->capture_default_str();
  cmd->add_option("--max-depth", s.max_depth_mm, "mm")->capture_default_str();
  cmd->add_option("--retry-limit", s.retry_limit, "pose draws per sample")->capture_default_str();
}

const std::map<std::string, LookupMode> kLookup = {{"interpolate", LookupMode::kInterpolate},
                                                    {"nearest", LookupMode::kNearestVertex}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface-coordinate registration of a meshed region to camera frames"};
  app.require_subcommand(1);
  std::string config_path;

  auto* param_cmd = app.add_subcommand("parameterize", "compute and save (mu, nu) for a case");
  ParameterizeArgs param_args;
  param_cmd->add_option("-c,--config", config_path, "case config")->required();
  param_cmd->add_option("-o,--out", param_args.output, "output file (default <output_dir>/param.txt)");

  auto* render_cmd = app.add_subcommand("render", "render the coordinate map and overlay");
  RenderArgs render_args;
  render_cmd->add_option("-c,--config", config_path, "case config")->required();
  render_cmd->add_option("-p,--pose", render_args.pose, "pose file")->required();
  render_cmd->add_option("-m,--map", render_args.map_out, "coordinate map PNG")->required();
  render_cmd->add_option("--overlay", render_args.overlay_out, "overlay PNG");
  render_cmd->add_option("--background", render_args.background, "background frame PNG");
  render_cmd->add_option("--opacity", render_args.opacity)->capture_default_str();
  render_cmd->add_option("--threads", render_args.bands, "raster bands")->capture_default_str();

  auto* solve_cmd = app.add_subcommand("solve", "estimate the pose from a coordinate map");
  SolveArgs solve_args;
  solve_cmd->add_option("-c,--config", config_path, "case config")->required();
  solve_cmd->add_option("-m,--map", solve_args.map, "coordinate map PNG")->required();
  solve_cmd->add_option("-o,--out", solve_args.pose_out, "pose file")->required();
  solve_cmd->add_option("--diagnostics", solve_args.diagnostics_out, "solver report JSON");
  solve_cmd->add_option("--lookup", solve_args.lookup, "interpolate or nearest")
      ->transform(CLI::CheckedTransformer(kLookup))
      ->default_str("interpolate");
  solve_cmd->add_flag("--ransac", solve_args.ransac, "robust estimation");
  solve_cmd->add_option("--seed", solve_args.ransac_options.seed)->capture_default_str();
  add_ransac_flags(solve_cmd, solve_args.ransac_options);

  auto* eval_cmd = app.add_subcommand("eval", "compare predicted poses with ground truth");
  EvalArgs eval_args;
  eval_cmd->add_option("--truth", eval_args.truth_dir, "ground-truth pose directory")->required();
  eval_cmd->add_option("--pred", eval_args.pred_dir, "predicted pose directory")->required();
  eval_cmd->add_option("-o,--out", eval_args.out_dir, "report directory")->required();
  eval_cmd->add_option("--truth-maps", eval_args.truth_maps, "ground-truth map directory");
  eval_cmd->add_option("--pred-maps", eval_args.pred_maps, "predicted map directory");

  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic dataset");
  SynthArgs synth_args;
  synth_cmd->add_option("-c,--config", config_path, "case config")->required();
  synth_cmd->add_option("-o,--out", synth_args.out_dir, "dataset directory")->required();
  synth_cmd->add_option("-n,--count", synth_args.count)->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.seed)->capture_default_str();
  synth_cmd->add_option("--val-fraction", synth_args.validation_fraction)->capture_default_str();
  synth_cmd->add_option("--patches", synth_args.patches_per_sample, "augmented patches per sample")
      ->capture_default_str();
  synth_cmd->add_option("--max-rotation", synth_args.augment.max_rotation_deg, "patch degrees")
      ->capture_default_str();
  synth_cmd->add_option("--max-shift", synth_args.augment.max_translation_px, "patch pixels")
      ->capture_default_str();
  add_sampler_flags(synth_cmd, synth_args.sampler);

  auto* bench_cmd = app.add_subcommand("bench", "pose accuracy over a noise grid");
  BenchArgs bench_args;
  std::vector<std::string> noise = {"none"};
  bool no_ransac = false;
  bench_cmd->add_option("-c,--config", config_path, "case config")->required();
  bench_cmd->add_option("-o,--out", bench_args.out_dir, "report directory")->required();
  bench_cmd->add_option("-n,--count", bench_args.count)->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed)->capture_default_str();
  bench_cmd->add_option("--noise", noise,
                        "grid points: none or kind=magnitude[+kind=magnitude], kinds gaussian, "
                        "dropout, outlier")
      ->capture_default_str();
  bench_cmd->add_option("--lookup", bench_args.lookup, "interpolate or nearest")
      ->transform(CLI::CheckedTransformer(kLookup))
      ->default_str("interpolate");
  bench_cmd->add_flag("--no-ransac", no_ransac, "plain least squares");
  add_ransac_flags(bench_cmd, bench_args.ransac_options);
  add_sampler_flags(bench_cmd, bench_args.sampler);

  auto* serve_cmd = app.add_subcommand("serve", "manual registration service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> frames_dir, poses_dir;
  serve_cmd->add_option("-c,--config", config_path, "case config")->required();
  serve_cmd->add_option("--bind", host, "listen address")->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str();
  serve_cmd->add_option("--frames", frames_dir, "frame directory (default from config)");
  serve_cmd->add_option("--poses", poses_dir, "saved pose directory (default <output_dir>/poses)");

  auto* demo_cmd = app.add_subcommand("demo", "write a runnable example case");
  std::filesystem::path demo_dir = "demo";
  int demo_frames = 8;
  std::uint64_t demo_seed = 0;
  demo_cmd->add_option("-o,--out", demo_dir)->capture_default_str();
  demo_cmd->add_option("-n,--frames", demo_frames)->capture_default_str();
  demo_cmd->add_option("--seed", demo_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (demo_cmd->parsed()) {
      cmd_demo(demo_dir, demo_frames, demo_seed, std::cout);
      return 0;
    }
    if (eval_cmd->parsed()) {
      cmd_eval(eval_args, std::cout);
      return 0;
    }
    const Project project(load_config(config_path));
    if (param_cmd->parsed()) cmd_parameterize(project, param_args, std::cout);
    if (render_cmd->parsed()) cmd_render(project, render_args, std::cout);
    if (solve_cmd->parsed()) cmd_solve(project, solve_args, std::cout);
    if (synth_cmd->parsed()) cmd_synth(project, synth_args, std::cout);
    if (bench_cmd->parsed()) {
      for (const std::string& point : noise) bench_args.grid.push_back(parse_noise_point(point));
      bench_args.ransac = !no_ransac;
      cmd_bench(project, bench_args, std::cout);
    }
    if (serve_cmd->parsed()) {
      const auto frames = frames_dir ? *frames_dir : project.config.frames_dir.value_or("");
      if (frames.empty()) {
        throw Error(ErrorCode::kInvalidInput, "serve: no frame directory (--frames or config)");
      }
      RegistrationService service(project, frames,
                                  poses_dir.value_or(project.config.output_dir / "poses"));
      const int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << service.frame_ids().size() << " frames on http://" << host
                << ":" << bound << std::endl;
      service.run();
      g_service = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
