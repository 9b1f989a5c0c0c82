#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ossireg/correspondence.hpp"
#include "ossireg/datagen.hpp"
#include "ossireg/error.hpp"
#include "project.hpp"

namespace ossireg::cli {

namespace fs = std::filesystem;

/// 0 success, 2 input, 3 empty or degenerate data, 4 numerical failure.
int exit_code(ErrorCode code);

/// Centroid of the region vertices; synthetic and default poses aim at it.
Vec3 region_center(const RegionMesh& region);
/// Surface facing the camera, region center on the optical axis at depth_mm.
Pose default_pose(const RegionMesh& region, double depth_mm = 500.0);

struct ParameterizeArgs {
  std::optional<fs::path> output;  ///< defaults to the config's param path
};
void cmd_parameterize(const Project& project, const ParameterizeArgs& args, std::ostream& log);

struct RenderArgs {
  fs::path pose;
  fs::path map_out;
  std::optional<fs::path> overlay_out;
  std::optional<fs::path> background;  ///< flat grey when absent
  double opacity = 0.5;
  int bands = 1;
};
void cmd_render(const Project& project, const RenderArgs& args, std::ostream& log);

/// Grey frame used when no background is given.
Image8 plain_background(const CameraModel& camera);

struct SolveArgs {
  fs::path map;
  fs::path pose_out;
  std::optional<fs::path> diagnostics_out;
  LookupMode lookup = LookupMode::kInterpolate;
  bool ransac = false;
  RansacOptions ransac_options;
};
void cmd_solve(const Project& project, const SolveArgs& args, std::ostream& log);

struct EvalArgs {
  fs::path truth_dir;
  fs::path pred_dir;
  fs::path out_dir;
  /// Optional coordinate-map directories for the image losses.
  std::optional<fs::path> truth_maps;
  std::optional<fs::path> pred_maps;
};
void cmd_eval(const EvalArgs& args, std::ostream& log);

struct SynthArgs {
  fs::path out_dir;
  int count = 30;
  std::uint64_t seed = 0;
  double validation_fraction = 0.25;
  PoseSampler sampler;  ///< anchor is replaced by the region center
  int patches_per_sample = 0;
  AugmentSpec augment;
};
void cmd_synth(const Project& project, const SynthArgs& args, std::ostream& log);

/// A combination of noise models applied together; empty means noise-free.
struct NoisePoint {
  std::string label;
  std::vector<NoiseModel> models;  ///< seeds are filled per sample
};
/// "none" or "kind=magnitude[+kind=magnitude...]".
NoisePoint parse_noise_point(const std::string& text);

struct BenchArgs {
  fs::path out_dir;
  int count = 30;
  std::uint64_t seed = 0;
  std::vector<NoisePoint> grid;
  PoseSampler sampler;
  LookupMode lookup = LookupMode::kInterpolate;
  bool ransac = true;
  RansacOptions ransac_options;
};
void cmd_bench(const Project& project, const BenchArgs& args, std::ostream& log);

/// Writes a runnable example case (dome patch mesh, config, frames) into dir
/// and returns the config path.
fs::path cmd_demo(const fs::path& dir, int frames, std::uint64_t seed, std::ostream& log);

}  // namespace ossireg::cli
