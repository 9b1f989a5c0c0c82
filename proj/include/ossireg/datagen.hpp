#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ossireg/camera.hpp"
#include "ossireg/image.hpp"
#include "ossireg/parameterization.hpp"
#include "ossireg/raster.hpp"

namespace ossireg {

/// Pixel rectangle [x, x + width) x [y, y + height).
struct BoundingBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Smallest box around the valid pixels; nullopt for an empty map.
std::optional<BoundingBox> valid_bounds(const CoordinateMap& map);

/// Spatial transform applied around the patch center, in this order:
/// flips, rotation (counter-clockwise on screen, degrees), translation (px).
struct PatchTransform {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

struct PatchProvenance {
  std::string frame_id;
  BoundingBox bbox;   ///< in the source frame
  int crop_x = 0;     ///< crop origin in the resized frame
  int crop_y = 0;
  std::vector<PatchTransform> transforms;  ///< augmentations, in order
  std::uint64_t seed = 0;
};

struct LabeledPatch {
  Image8 image;
  CoordinateMap map;  ///< no depth
  PatchProvenance provenance;
};

constexpr int kResizedWidth = 192;
constexpr int kResizedHeight = 108;
constexpr int kPatchSize = 64;

/// Resizes frame (bilinear) and map (nearest) to 192x108, then crops 64x64
/// around the resized bbox center, clamped to the image.
LabeledPatch make_patch(const Image8& frame, const CoordinateMap& map, const BoundingBox& bbox,
                        const std::string& frame_id = "");

Image8 resize_bilinear(const Image8& image, int width, int height);
CoordinateMap resize_nearest(const CoordinateMap& map, int width, int height);

/// Same inverse-mapped sampling grid for both: bilinear for the image,
/// nearest for the map. Samples outside the source are black / invalid.
LabeledPatch apply_transform(const LabeledPatch& patch, const PatchTransform& transform);

struct AugmentSpec {
  bool flip_horizontal = true;
  bool flip_vertical = true;
  double max_rotation_deg = 30.0;
  double max_translation_px = 8.0;
};

/// count transformed copies. Copy i draws its transform from seed ^ i.
std::vector<LabeledPatch> augment(const LabeledPatch& patch, const AugmentSpec& spec, int count,
                                  std::uint64_t seed);
PatchTransform sample_transform(const AugmentSpec& spec, std::uint64_t seed);

enum class NoiseKind { kGaussian, kDropout, kOutlier };
struct NoiseModel {
  NoiseKind kind = NoiseKind::kGaussian;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};
NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

/// Ground truth corrupted by each model in turn. gaussian adds N(0, m^2) to
/// valid (mu, nu) and clamps; dropout invalidates round(m * valid) pixels;
/// outlier gives round(m * valid) pixels uniform random (mu, nu).
CoordinateMap oracle_predict(const CoordinateMap& truth, const std::vector<NoiseModel>& noise);
CoordinateMap oracle_predict(const CoordinateMap& truth, const NoiseModel& noise);

/// Pose distribution for synthetic scenes. The base rotation turns the
/// surface's +z side toward the camera; a random tilt (axis in the image
/// plane) and an in-plane spin follow.
struct PoseSampler {
  Eigen::Matrix3d base_rotation = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  double max_tilt_deg = 30.0;
  double max_spin_deg = 180.0;
  double max_offset_x_mm = 4.0;
  double max_offset_y_mm = 2.0;
  double min_depth_mm = 400.0;
  double max_depth_mm = 600.0;
  /// Region center in mesh coordinates; placed at the sampled offset.
  Vec3 anchor = Vec3::Zero();
  std::uint64_t seed = 0;
  int retry_limit = 100;

  /// One draw; successive calls on the same generator give the retries.
  Pose sample(std::mt19937_64& rng) const;
};

struct SceneSample {
  std::string id;
  Pose pose;
  CoordinateMap map;
  Image8 frame;  ///< grey shaded render on a textured background
  std::uint64_t seed = 0;
  std::string split;  ///< "train" or "val"
};

struct SceneOptions {
  /// Trailing fraction of samples marked "val".
  double validation_fraction = 0.25;
  RasterOptions raster;
};

/// n rendered samples; sample i uses sub-seed seed ^ i and resamples its pose
/// until the map has a valid pixel. Throws kDegenerate after retry_limit.
std::vector<SceneSample> synth_scene(const SurfaceParameterization& param,
                                     const CameraModel& camera, const PoseSampler& sampler,
                                     int n, const SceneOptions& options = {});

/// Grey frame: smooth background with the region Lambert-shaded on top.
Image8 render_frame(const SurfaceParameterization& param, const CameraModel& camera,
                    const Pose& pose, std::uint64_t seed, const RasterOptions& options = {});

/// Writes maps/<id>.png, frames/<id>.png, poses/<id>.json and manifest.jsonl
/// under dir. Each manifest line is one JSON record.
void write_dataset(const std::filesystem::path& dir, const std::vector<SceneSample>& samples,
                   const CameraModel& camera, const PoseSampler& sampler);

}  // namespace ossireg
