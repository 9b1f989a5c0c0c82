#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ossireg/file_io.hpp"
#include "ossireg/image.hpp"
#include "ossireg/metrics.hpp"
#include "ossireg/raster.hpp"
#include "ossireg/shapes.hpp"

namespace ossireg::cli {
namespace {

using json = nlohmann::json;

json pnp_json(const PnPResult& r, std::size_t correspondences) {
  return {{"correspondences", correspondences},
          {"rms_px", r.rms},
          {"initial_rms_px", r.initial_rms},
          {"inliers", r.inliers},
          {"inlier_ratio", r.inlier_ratio},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"planar_initialization", r.planar_initialization},
          {"rms_history", r.rms_history}};
}

PnPResult solve(const CorrespondenceSet& corr, const CameraModel& camera, bool ransac,
                const RansacOptions& options) {
  return ransac ? solve_pnp_ransac(corr, camera, options)
                : solve_pnp(corr, camera, options.refine);
}

/// Files <stem>.<ext> in dir, keyed by stem.
std::map<std::string, fs::path> list_by_stem(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kInvalidInput, "not a directory: " + dir.string());
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out[entry.path().stem().string()] = entry.path();
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kParse:
    case ErrorCode::kFormat:
      return 2;
    case ErrorCode::kDegenerate:
      return 3;
    case ErrorCode::kNoConsensus:
    case ErrorCode::kNumerical:
      return 4;
  }
  return 4;
}

Vec3 region_center(const RegionMesh& region) {
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : region.surface().positions) sum += p;
  return sum / std::max(1, region.vertex_count());
}

Pose default_pose(const RegionMesh& region, double depth_mm) {
  Pose pose;
  pose.rotation = PoseSampler{}.base_rotation;
  pose.translation = Vec3(0.0, 0.0, depth_mm) - pose.rotation * region_center(region);
  return pose;
}

Image8 plain_background(const CameraModel& camera) {
  return Image8(camera.width, camera.height, 3, 128);
}

void cmd_parameterize(const Project& project, const ParameterizeArgs& args, std::ostream& log) {
  const SurfaceParameterization param = project.compute_parameterization();
  const fs::path out = args.output.value_or(project.config.parameterization_path());
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_parameterization(out, param);
  const auto [mu_lo, mu_hi] = std::minmax_element(param.mu.begin(), param.mu.end());
  const auto [nu_lo, nu_hi] = std::minmax_element(param.nu.begin(), param.nu.end());
  log << "region: " << project.region->vertex_count() << " vertices, "
      << project.region->face_count() << " faces\n"
      << "poles: alpha " << param.alpha_parent() << ", beta " << param.beta_parent() << "\n"
      << "meridian: " << param.meridian.points.size() << " points, length "
      << param.meridian.length() << " mm"
      << (param.meridian.edge_fallback ? " (edge-graph fallback)" : "") << "\n"
      << "cut surface: " << param.cut.mesh.vertex_count() << " vertices ("
      << param.cut.duplicated_count() << " duplicated)\n"
      << "mu range: [" << *mu_lo << ", " << *mu_hi << "], nu range: [" << *nu_lo << ", "
      << *nu_hi << "]\n"
      << "wrote " << out.string() << "\n";
}

void cmd_render(const Project& project, const RenderArgs& args, std::ostream& log) {
  const PoseRecord record = load_pose(args.pose);
  const SurfaceParameterization param = project.parameterization();
  RasterOptions raster;
  raster.bands = args.bands;
  const CoordinateMap map = render_coordinate_map(param, record.camera, record.pose, raster);
  if (args.map_out.has_parent_path()) fs::create_directories(args.map_out.parent_path());
  write_map(args.map_out, map);
  log << "map: " << map.valid_count() << " covered pixels -> " << args.map_out.string() << "\n";
  if (args.overlay_out) {
    const Image8 background =
        args.background ? load_png(*args.background) : plain_background(record.camera);
    write_png(*args.overlay_out, blend_overlay(map, background, args.opacity));
    log << "overlay: opacity " << args.opacity << " -> " << args.overlay_out->string() << "\n";
  }
}

void cmd_solve(const Project& project, const SolveArgs& args, std::ostream& log) {
  const CoordinateMap map = load_map(args.map);
  const CameraModel& camera = project.config.camera;
  if (map.width != camera.width || map.height != camera.height) {
    throw Error(ErrorCode::kInvalidInput, "map size " + std::to_string(map.width) + "x" +
                                              std::to_string(map.height) +
                                              " does not match the camera");
  }
  const SurfaceParameterization param = project.parameterization();
  const CorrespondenceSet corr = extract_correspondences(map, param, args.lookup);
  if (corr.items.empty()) {
    throw Error(ErrorCode::kDegenerate, "no correspondences: the map has no usable pixels");
  }
  RansacOptions ransac = args.ransac_options;
  ransac.refine = project.config.pnp;
  const PnPResult result = solve(corr, camera, args.ransac, ransac);
  if (args.pose_out.has_parent_path()) fs::create_directories(args.pose_out.parent_path());
  write_pose(args.pose_out, PoseRecord{result.pose, camera, 0});
  json diag = pnp_json(result, corr.items.size());
  diag["lookup"] = args.lookup == LookupMode::kInterpolate ? "interpolate" : "nearest";
  diag["ransac"] = args.ransac;
  if (args.ransac) {
    diag["ransac_seed"] = ransac.seed;
    diag["ransac_iterations"] = ransac.iterations;
    diag["inlier_threshold_px"] = ransac.inlier_threshold_px;
  }
  if (args.diagnostics_out) write_file(*args.diagnostics_out, diag.dump(2) + "\n");
  log << "correspondences: " << corr.items.size() << "\n"
      << "rms: " << result.rms << " px (initial " << result.initial_rms << ")\n"
      << "iterations: " << result.iterations << (result.converged ? "" : " (not converged)")
      << "\n";
  if (args.ransac) log << "inliers: " << result.inliers << " (" << result.inlier_ratio << ")\n";
  log << "wrote " << args.pose_out.string() << "\n";
}

void cmd_eval(const EvalArgs& args, std::ostream& log) {
  const auto truth = list_by_stem(args.truth_dir, ".json");
  const auto pred = list_by_stem(args.pred_dir, ".json");
  for (const auto& [id, path] : pred) {
    if (!truth.count(id)) {
      throw Error(ErrorCode::kInvalidInput, "no ground-truth pose for predicted sample " + id);
    }
  }
  std::vector<PoseErrorReport> reports;
  std::optional<CameraModel> camera;
  for (const auto& [id, path] : truth) {
    const auto it = pred.find(id);
    if (it == pred.end()) {
      throw Error(ErrorCode::kInvalidInput, "no predicted pose for sample " + id);
    }
    const PoseRecord t = load_pose(path);
    const PoseRecord p = load_pose(it->second);
    if (!camera) camera = t.camera;
    reports.push_back(compare_poses(id, p.pose, t.pose, t.camera));
  }
  if (reports.empty()) {
    throw Error(ErrorCode::kDegenerate, "no pose files in " + args.truth_dir.string());
  }
  fs::create_directories(args.out_dir);
  const std::vector<ErrorSummary> summary = summarize(reports);
  write_file(args.out_dir / "errors.csv", format_error_csv(reports));
  write_file(args.out_dir / "summary.csv", format_summary_csv(summary));

  json meta = {{"format", "ossireg.eval"},
               {"version", 1},
               {"samples", reports.size()},
               {"focal", camera->focal},
               {"rotation_error", "angle of R_est R_true^T, degrees"},
               {"translation_error", "ex, ey in mm; ez = 100 |dz| / focal"},
               {"quantiles", "linear interpolation between order statistics"}};
  if (args.truth_maps || args.pred_maps) {
    if (!args.truth_maps || !args.pred_maps) {
      throw Error(ErrorCode::kInvalidInput, "map losses need both truth and predicted maps");
    }
    const auto truth_maps = list_by_stem(*args.truth_maps, ".png");
    const auto pred_maps = list_by_stem(*args.pred_maps, ".png");
    std::ostringstream csv;
    csv << "sample_id,bce,mse,ssim,combined\n";
    for (const auto& [id, path] : truth_maps) {
      const auto it = pred_maps.find(id);
      if (it == pred_maps.end()) {
        throw Error(ErrorCode::kInvalidInput, "no predicted map for sample " + id);
      }
      const MapLosses l = compare_maps(load_map(path), load_map(it->second));
      csv << id << ',' << format_double(l.bce) << ',' << format_double(l.mse) << ','
          << format_double(l.ssim) << ',' << format_double(l.combined) << '\n';
    }
    write_file(args.out_dir / "losses.csv", csv.str());
    const SsimOptions ssim;
    meta["losses"] = {{"channels", {"mu", "nu"}},
                      {"mask", "union of the valid pixels of both maps"},
                      {"invalid_value", 0.0},
                      {"ssim_window", ssim.window},
                      {"ssim_scope", "full image, mean of the two channels"},
                      {"bce_epsilon", 1e-7}};
  }
  write_file(args.out_dir / "eval.json", meta.dump(2) + "\n");
  for (const ErrorSummary& s : summary) {
    log << s.metric << ": median " << s.median << ", q1 " << s.q1 << ", q3 " << s.q3
        << ", max " << s.max << "\n";
  }
  log << "wrote " << reports.size() << " rows to " << (args.out_dir / "errors.csv").string()
      << "\n";
}

void cmd_synth(const Project& project, const SynthArgs& args, std::ostream& log) {
  PoseSampler sampler = args.sampler;
  sampler.anchor = region_center(*project.region);
  sampler.seed = args.seed;
  SceneOptions options;
  options.validation_fraction = args.validation_fraction;
  const SurfaceParameterization param = project.parameterization();
  const std::vector<SceneSample> samples =
      synth_scene(param, project.config.camera, sampler, args.count, options);
  write_dataset(args.out_dir, samples, project.config.camera, sampler);
  log << "wrote " << samples.size() << " samples to " << args.out_dir.string() << "\n";
  if (args.patches_per_sample <= 0) return;

  fs::create_directories(args.out_dir / "patches");
  std::string provenance;
  int written = 0;
  for (const SceneSample& s : samples) {
    const auto bounds = valid_bounds(s.map);
    if (!bounds) continue;
    const LabeledPatch patch = make_patch(s.frame, s.map, *bounds, s.id);
    const std::vector<LabeledPatch> copies =
        augment(patch, args.augment, args.patches_per_sample, s.seed);
    for (size_t k = 0; k < copies.size(); ++k) {
      const LabeledPatch& p = copies[k];
      const std::string stem = s.id + "_" + std::to_string(k);
      ++written;
      write_png(args.out_dir / "patches" / (stem + ".png"), p.image);
      write_map(args.out_dir / "patches" / (stem + "_map.png"), p.map);
      json transforms = json::array();
      for (const PatchTransform& t : p.provenance.transforms) {
        transforms.push_back({{"flip_horizontal", t.flip_horizontal},
                              {"flip_vertical", t.flip_vertical},
                              {"rotation_deg", t.rotation_deg},
                              {"tx", t.tx},
                              {"ty", t.ty}});
      }
      const BoundingBox& b = p.provenance.bbox;
      json record = {{"id", stem},
                     {"frame", s.id},
                     {"bbox", {b.x, b.y, b.width, b.height}},
                     {"crop", {p.provenance.crop_x, p.provenance.crop_y}},
                     {"transforms", transforms},
                     {"seed", p.provenance.seed},
                     {"augment",
                      {{"flip_horizontal", args.augment.flip_horizontal},
                       {"flip_vertical", args.augment.flip_vertical},
                       {"max_rotation_deg", args.augment.max_rotation_deg},
                       {"max_translation_px", args.augment.max_translation_px}}}};
      provenance += record.dump() + "\n";
    }
  }
  write_file(args.out_dir / "patches.jsonl", provenance);
  log << "wrote " << written << " patches\n";
}

NoisePoint parse_noise_point(const std::string& text) {
  NoisePoint point{text, {}};
  if (text == "none" || text.empty()) {
    point.label = "none";
    return point;
  }
  std::stringstream parts(text);
  std::string part;
  while (std::getline(parts, part, '+')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidInput,
                  "noise point '" + text + "': expected kind=magnitude, got '" + part + "'");
    }
    NoiseModel model;
    model.kind = parse_noise_kind(part.substr(0, eq));
    try {
      size_t used = 0;
      model.magnitude = std::stod(part.substr(eq + 1), &used);
      if (used != part.size() - eq - 1) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidInput, "noise point '" + text + "': bad magnitude");
    }
    if (!(model.magnitude >= 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "noise point '" + text + "': negative magnitude");
    }
    point.models.push_back(model);
  }
  return point;
}

void cmd_bench(const Project& project, const BenchArgs& args, std::ostream& log) {
  if (args.grid.empty()) throw Error(ErrorCode::kInvalidInput, "bench: empty noise grid");
  PoseSampler sampler = args.sampler;
  sampler.anchor = region_center(*project.region);
  sampler.seed = args.seed;
  const CameraModel& camera = project.config.camera;
  const SurfaceParameterization param = project.parameterization();
  const CorrespondenceIndex index = build_correspondence_index(param);
  const std::vector<SceneSample> samples = synth_scene(param, camera, sampler, args.count);

  std::ostringstream csv;
  csv << "noise,sample_id,status,rot_deg,ex_mm,ey_mm,ez_pct,rms_px,inlier_ratio,"
         "correspondences\n";
  json points = json::array();
  for (const NoisePoint& point : args.grid) {
    std::vector<PoseErrorReport> reports;
    int failures = 0;
    for (const SceneSample& s : samples) {
      std::vector<NoiseModel> models = point.models;
      for (size_t k = 0; k < models.size(); ++k) {
        models[k].seed = s.seed ^ (0x9E3779B97F4A7C15ULL * (k + 1));
      }
      const CoordinateMap predicted = oracle_predict(s.map, models);
      const CorrespondenceSet corr = extract_correspondences(predicted, param, index, args.lookup);
      RansacOptions ransac = args.ransac_options;
      ransac.seed = s.seed;
      ransac.refine = project.config.pnp;
      csv << point.label << ',' << s.id << ',';
      try {
        const PnPResult r = solve(corr, camera, args.ransac, ransac);
        const PoseErrorReport e = compare_poses(s.id, r.pose, s.pose, camera);
        reports.push_back(e);
        csv << "ok," << format_double(e.rot_deg) << ',' << format_double(e.ex_mm) << ','
            << format_double(e.ey_mm) << ',' << format_double(e.ez_pct) << ','
            << format_double(r.rms) << ',' << format_double(r.inlier_ratio) << ','
            << corr.items.size() << '\n';
      } catch (const Error& e) {
        ++failures;
        csv << "failed,,,,,,," << corr.items.size() << '\n';
        log << point.label << " " << s.id << ": " << e.what() << "\n";
      }
    }
    json metrics = json::object();
    if (!reports.empty()) {
      for (const ErrorSummary& m : summarize(reports)) {
        metrics[m.metric] = {{"median", m.median}, {"q1", m.q1}, {"q3", m.q3}, {"max", m.max}};
        log << point.label << " " << m.metric << ": median " << m.median << ", max " << m.max
            << "\n";
      }
    }
    points.push_back({{"noise", point.label}, {"failures", failures}, {"metrics", metrics}});
  }
  fs::create_directories(args.out_dir);
  write_file(args.out_dir / "bench.csv", csv.str());
  const json report = {{"format", "ossireg.bench"},
                       {"version", 1},
                       {"samples", samples.size()},
                       {"seed", args.seed},
                       {"ransac", args.ransac},
                       {"inlier_threshold_px", args.ransac_options.inlier_threshold_px},
                       {"lookup", args.lookup == LookupMode::kInterpolate ? "interpolate"
                                                                          : "nearest"},
                       {"grid", points}};
  write_file(args.out_dir / "bench.json", report.dump(2) + "\n");
  log << "wrote " << args.grid.size() * samples.size() << " rows to "
      << (args.out_dir / "bench.csv").string() << "\n";
}

fs::path cmd_demo(const fs::path& dir, int frames, std::uint64_t seed, std::ostream& log) {
  fs::create_directories(dir);
  const PatchShape shape;
  write_mesh(dir / "patch.obj", make_dome_patch(shape), MeshFormat::kObj);
  ProjectConfig config;
  config.mesh = dir / "patch.obj";
  config.alpha = dome_patch_vertex(shape, 8, shape.half_rows);
  config.beta = dome_patch_vertex(shape, 2 * shape.half_columns - 8, shape.half_rows);
  config.camera = CameraModel::centered(1920, 1080);
  config.output_dir = dir / "out";
  const fs::path config_path = dir / "case.json";
  write_file(config_path, format_config(config, dir));

  Project project(load_config(config_path));
  cmd_parameterize(project, {}, log);
  SynthArgs synth;
  synth.out_dir = dir / "dataset";
  synth.count = frames;
  synth.seed = seed;
  cmd_synth(project, synth, log);

  // Point the viewer at the synthetic frames.
  config.frames_dir = synth.out_dir / "frames";
  write_file(config_path, format_config(config, dir));
  log << "demo case: " << config_path.string() << "\n";
  return config_path;
}

}  // namespace ossireg::cli
