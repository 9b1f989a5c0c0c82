#include "ossireg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"

namespace ossireg {
namespace {

using json = nlohmann::json;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits; avoids implementation-defined distribution objects.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Box-Muller on the generator above, for the same reason.
double normal(std::mt19937_64& rng) {
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Bilinear read with edge clamping; (sx, sy) in continuous pixel coordinates
// where pixel centers sit at +0.5.
void sample_bilinear(const Image8& image, double sx, double sy, std::uint8_t* out) {
  const double fx = sx - 0.5, fy = sy - 0.5;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const double wx = fx - x0, wy = fy - y0;
  const auto px = [&](int x, int y) {
    return image.at(std::clamp(x, 0, image.width - 1), std::clamp(y, 0, image.height - 1));
  };
  const std::uint8_t* a = px(x0, y0);
  const std::uint8_t* b = px(x0 + 1, y0);
  const std::uint8_t* c = px(x0, y0 + 1);
  const std::uint8_t* d = px(x0 + 1, y0 + 1);
  for (int k = 0; k < image.channels; ++k) {
    const double top = wx == 0.0 ? a[k] : (1.0 - wx) * a[k] + wx * b[k];
    const double bottom = wx == 0.0 ? c[k] : (1.0 - wx) * c[k] + wx * d[k];
    const double v = wy == 0.0 ? top : (1.0 - wy) * top + wy * bottom;
    out[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
}

// Indices of round(fraction * count) distinct valid pixels, by partial shuffle.
std::vector<int> pick_valid(const CoordinateMap& map, double fraction, std::mt19937_64& rng) {
  std::vector<int> valid;
  for (size_t i = 0; i < map.valid.size(); ++i) {
    if (map.valid[i]) valid.push_back(static_cast<int>(i));
  }
  const size_t k = std::min(valid.size(),
                            static_cast<size_t>(std::llround(fraction * valid.size())));
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng() % (valid.size() - i));
    std::swap(valid[i], valid[j]);
  }
  valid.resize(k);
  std::sort(valid.begin(), valid.end());
  return valid;
}

json pose_json(const Pose& pose) {
  json r = json::array();
  for (int i = 0; i < 9; ++i) r.push_back(pose.rotation(i / 3, i % 3));
  return {{"rotation", r},
          {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

}  // namespace

std::optional<BoundingBox> valid_bounds(const CoordinateMap& map) {
  int x0 = map.width, y0 = map.height, x1 = -1, y1 = -1;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (!map.valid[map.index(x, y)]) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Image8 resize_bilinear(const Image8& image, int width, int height) {
  Image8 out(width, height, image.channels);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      sample_bilinear(image, (x + 0.5) * sx, (y + 0.5) * sy, out.at(x, y));
    }
  }
  return out;
}

CoordinateMap resize_nearest(const CoordinateMap& map, int width, int height) {
  CoordinateMap out(width, height, false);
  for (int y = 0; y < height; ++y) {
    const int src_y = std::min(map.height - 1, static_cast<int>(
                                                   std::floor((y + 0.5) * map.height / height)));
    for (int x = 0; x < width; ++x) {
      const int src_x = std::min(map.width - 1, static_cast<int>(
                                                    std::floor((x + 0.5) * map.width / width)));
      const int s = map.index(src_x, src_y), d = out.index(x, y);
      out.mu[d] = map.mu[s];
      out.nu[d] = map.nu[s];
      out.valid[d] = map.valid[s];
    }
  }
  return out;
}

LabeledPatch make_patch(const Image8& frame, const CoordinateMap& map, const BoundingBox& bbox,
                        const std::string& frame_id) {
  if (frame.width != map.width || frame.height != map.height) {
    throw Error(ErrorCode::kInvalidInput, "make_patch: frame and map sizes differ");
  }
  if (bbox.width <= 0 || bbox.height <= 0 || bbox.x < 0 || bbox.y < 0 ||
      bbox.x + bbox.width > frame.width || bbox.y + bbox.height > frame.height) {
    throw Error(ErrorCode::kInvalidInput, "make_patch: bounding box outside the frame");
  }
  const Image8 small_image = resize_bilinear(frame, kResizedWidth, kResizedHeight);
  const CoordinateMap small_map = resize_nearest(map, kResizedWidth, kResizedHeight);
  const double cx = (bbox.x + bbox.width / 2.0) * kResizedWidth / frame.width;
  const double cy = (bbox.y + bbox.height / 2.0) * kResizedHeight / frame.height;
  const int x0 = std::clamp(static_cast<int>(std::lround(cx - kPatchSize / 2.0)), 0,
                            kResizedWidth - kPatchSize);
  const int y0 = std::clamp(static_cast<int>(std::lround(cy - kPatchSize / 2.0)), 0,
                            kResizedHeight - kPatchSize);

  LabeledPatch patch{Image8(kPatchSize, kPatchSize, frame.channels),
                     CoordinateMap(kPatchSize, kPatchSize, false),
                     {frame_id, bbox, x0, y0, {}, 0}};
  for (int y = 0; y < kPatchSize; ++y) {
    for (int x = 0; x < kPatchSize; ++x) {
      std::copy_n(small_image.at(x0 + x, y0 + y), frame.channels, patch.image.at(x, y));
      const int s = small_map.index(x0 + x, y0 + y), d = patch.map.index(x, y);
      patch.map.mu[d] = small_map.mu[s];
      patch.map.nu[d] = small_map.nu[s];
      patch.map.valid[d] = small_map.valid[s];
    }
  }
  return patch;
}

LabeledPatch apply_transform(const LabeledPatch& patch, const PatchTransform& t) {
  const int w = patch.image.width, h = patch.image.height;
  if (patch.map.width != w || patch.map.height != h) {
    throw Error(ErrorCode::kInvalidInput, "apply_transform: image and map sizes differ");
  }
  LabeledPatch out{Image8(w, h, patch.image.channels), CoordinateMap(w, h, false),
                   patch.provenance};
  out.provenance.transforms.push_back(t);
  const double angle = t.rotation_deg * M_PI / 180.0;
  // Quarter turns get exact coefficients so they permute pixels exactly.
  double c = std::cos(angle), s = std::sin(angle);
  const double quarters = t.rotation_deg / 90.0;
  if (quarters == std::round(quarters)) {
    const int q = ((static_cast<int>(quarters) % 4) + 4) % 4;
    static constexpr int kCos[4] = {1, 0, -1, 0};
    static constexpr int kSin[4] = {0, 1, 0, -1};
    c = kCos[q];
    s = kSin[q];
  }
  const double ox = w / 2.0, oy = h / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Undo translation, then rotation (counter-clockwise on screen with v
      // down: forward is (qx, qy) -> (c qx + s qy, -s qx + c qy)), then flips.
      const double qx = x + 0.5 - ox - t.tx, qy = y + 0.5 - oy - t.ty;
      double rx = c * qx - s * qy;
      double ry = s * qx + c * qy;
      if (t.flip_horizontal) rx = -rx;
      if (t.flip_vertical) ry = -ry;
      const double sx = rx + ox, sy = ry + oy;
      std::uint8_t* px = out.image.at(x, y);
      if (sx < 0.0 || sy < 0.0 || sx >= w || sy >= h) {
        std::fill_n(px, out.image.channels, 0);
        continue;
      }
      sample_bilinear(patch.image, sx, sy, px);
      const int src = patch.map.index(static_cast<int>(std::floor(sx)),
                                      static_cast<int>(std::floor(sy)));
      const int dst = out.map.index(x, y);
      out.map.mu[dst] = patch.map.mu[src];
      out.map.nu[dst] = patch.map.nu[src];
      out.map.valid[dst] = patch.map.valid[src];
    }
  }
  return out;
}

PatchTransform sample_transform(const AugmentSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PatchTransform t;
  const bool fh = rng() & 1, fv = rng() & 1;
  t.flip_horizontal = spec.flip_horizontal && fh;
  t.flip_vertical = spec.flip_vertical && fv;
  t.rotation_deg = uniform(rng, -spec.max_rotation_deg, spec.max_rotation_deg);
  t.tx = uniform(rng, -spec.max_translation_px, spec.max_translation_px);
  t.ty = uniform(rng, -spec.max_translation_px, spec.max_translation_px);
  return t;
}

std::vector<LabeledPatch> augment(const LabeledPatch& patch, const AugmentSpec& spec, int count,
                                  std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::kInvalidInput, "augment: count must be at least 1");
  std::vector<LabeledPatch> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t sub = seed ^ static_cast<std::uint64_t>(i);
    out.push_back(apply_transform(patch, sample_transform(spec, sub)));
    out.back().provenance.seed = sub;
  }
  return out;
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "dropout") return NoiseKind::kDropout;
  if (name == "outlier") return NoiseKind::kOutlier;
  throw Error(ErrorCode::kInvalidInput, "unknown noise kind '" + name +
                                            "' (expected gaussian, dropout or outlier)");
}

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kDropout: return "dropout";
    case NoiseKind::kOutlier: return "outlier";
  }
  return "unknown";
}

CoordinateMap oracle_predict(const CoordinateMap& truth, const std::vector<NoiseModel>& noise) {
  CoordinateMap out = truth;
  for (const NoiseModel& model : noise) {
    if (!(model.magnitude >= 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "oracle: noise magnitude must be non-negative");
    }
    if (model.magnitude == 0.0) continue;
    std::mt19937_64 rng(model.seed);
    switch (model.kind) {
      case NoiseKind::kGaussian:
        for (size_t i = 0; i < out.valid.size(); ++i) {
          if (!out.valid[i]) continue;
          out.mu[i] = std::clamp(out.mu[i] + model.magnitude * normal(rng), 0.0, 1.0);
          out.nu[i] = std::clamp(out.nu[i] + model.magnitude * normal(rng), 0.0, 1.0);
        }
        break;
      case NoiseKind::kDropout:
        if (model.magnitude > 1.0) {
          throw Error(ErrorCode::kInvalidInput, "oracle: dropout fraction above 1");
        }
        for (int i : pick_valid(out, model.magnitude, rng)) {
          out.valid[i] = 0;
          out.mu[i] = out.nu[i] = 0.0;
          if (!out.depth.empty()) out.depth[i] = 0.0;
        }
        break;
      case NoiseKind::kOutlier:
        if (model.magnitude > 1.0) {
          throw Error(ErrorCode::kInvalidInput, "oracle: outlier fraction above 1");
        }
        for (int i : pick_valid(out, model.magnitude, rng)) {
          out.mu[i] = uniform(rng, 0.0, 1.0);
          out.nu[i] = uniform(rng, 0.0, 1.0);
        }
        break;
    }
  }
  return out;
}

CoordinateMap oracle_predict(const CoordinateMap& truth, const NoiseModel& noise) {
  return oracle_predict(truth, std::vector<NoiseModel>{noise});
}

Pose PoseSampler::sample(std::mt19937_64& rng) const {
  const double axis_angle = uniform(rng, 0.0, 2.0 * M_PI);
  const double tilt = uniform(rng, 0.0, max_tilt_deg) * M_PI / 180.0;
  const double spin = uniform(rng, -max_spin_deg, max_spin_deg) * M_PI / 180.0;
  const Vec3 offset(uniform(rng, -max_offset_x_mm, max_offset_x_mm),
                    uniform(rng, -max_offset_y_mm, max_offset_y_mm),
                    uniform(rng, min_depth_mm, max_depth_mm));
  const Vec3 axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
  Pose pose;
  pose.rotation = orthonormalize(Eigen::AngleAxisd(spin, Vec3::UnitZ()).toRotationMatrix() *
                                 Eigen::AngleAxisd(tilt, axis).toRotationMatrix() *
                                 base_rotation);
  pose.translation = offset - pose.rotation * anchor;
  return pose;
}

Image8 render_frame(const SurfaceParameterization& param, const CameraModel& camera,
                    const Pose& pose, std::uint64_t seed, const RasterOptions& options) {
  std::mt19937_64 rng(seed);
  const double fx = uniform(rng, 0.004, 0.012), fy = uniform(rng, 0.004, 0.012);
  const double px = uniform(rng, 0.0, 2.0 * M_PI), py = uniform(rng, 0.0, 2.0 * M_PI);
  Image8 frame(camera.width, camera.height, 3);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const double v = 0.5 + 0.25 * std::sin(fx * x + px) * std::cos(fy * y + py);
      std::uint8_t* p = frame.at(x, y);
      p[0] = static_cast<std::uint8_t>(std::lround(200.0 * v));
      p[1] = static_cast<std::uint8_t>(std::lround(120.0 * v));
      p[2] = static_cast<std::uint8_t>(std::lround(110.0 * v));
    }
  }
  const SurfaceMesh& mesh = param.cut.mesh;
  const RasterBuffer buffer = rasterize(mesh, camera, pose, options);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const int f = buffer.face[buffer.index(x, y)];
      if (f < 0) continue;
      const Vec3 n = pose.rotation * face_normal(mesh, f);
      const auto shade =
          static_cast<std::uint8_t>(std::lround(60.0 + 180.0 * std::abs(n.z())));
      std::uint8_t* p = frame.at(x, y);
      p[0] = p[1] = p[2] = shade;
    }
  }
  return frame;
}

std::vector<SceneSample> synth_scene(const SurfaceParameterization& param,
                                     const CameraModel& camera, const PoseSampler& sampler,
                                     int n, const SceneOptions& options) {
  camera.validate();
  if (n < 0) throw Error(ErrorCode::kInvalidInput, "synth_scene: negative sample count");
  if (!(sampler.min_depth_mm > 0.0) || sampler.max_depth_mm < sampler.min_depth_mm) {
    throw Error(ErrorCode::kInvalidInput, "synth_scene: depth range must be positive");
  }
  const int n_val = static_cast<int>(std::llround(options.validation_fraction * n));
  std::vector<SceneSample> out;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t sub = sampler.seed ^ static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(sub);
    SceneSample sample;
    bool ok = false;
    for (int attempt = 0; attempt < std::max(1, sampler.retry_limit) && !ok; ++attempt) {
      sample.pose = sampler.sample(rng);
      sample.map = render_coordinate_map(param, camera, sample.pose, options.raster);
      ok = sample.map.valid_count() > 0;
    }
    if (!ok) {
      throw Error(ErrorCode::kDegenerate, "synth_scene: sample " + std::to_string(i) +
                                              " saw no surface after " +
                                              std::to_string(sampler.retry_limit) + " poses");
    }
    char id[32];
    std::snprintf(id, sizeof(id), "s%04d", i);
    sample.id = id;
    sample.seed = sub;
    sample.split = i >= n - n_val ? "val" : "train";
    sample.frame = render_frame(param, camera, sample.pose, sub, options.raster);
    out.push_back(std::move(sample));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SceneSample>& samples,
                   const CameraModel& camera, const PoseSampler& sampler) {
  for (const char* sub : {"maps", "frames", "poses"}) {
    std::filesystem::create_directories(dir / sub);
  }
  const json cam = {{"focal", camera.focal},   {"cx", camera.cx},
                    {"cy", camera.cy},         {"width", camera.width},
                    {"height", camera.height}};
  const json sampler_json = {{"max_tilt_deg", sampler.max_tilt_deg},
                             {"max_spin_deg", sampler.max_spin_deg},
                             {"max_offset_x_mm", sampler.max_offset_x_mm},
                             {"max_offset_y_mm", sampler.max_offset_y_mm},
                             {"min_depth_mm", sampler.min_depth_mm},
                             {"max_depth_mm", sampler.max_depth_mm},
                             {"seed", sampler.seed}};
  std::string manifest;
  for (const auto& s : samples) {
    const std::string map_path = "maps/" + s.id + ".png";
    const std::string frame_path = "frames/" + s.id + ".png";
    const std::string pose_path = "poses/" + s.id + ".json";
    write_map(dir / map_path, s.map);
    write_png(dir / frame_path, s.frame);
    write_pose(dir / pose_path, PoseRecord{s.pose, camera, 0});
    json record = {{"format", "ossireg.sample"},
                   {"version", 1},
                   {"id", s.id},
                   {"split", s.split},
                   {"seed", s.seed},
                   {"map", map_path},
                   {"frame", frame_path},
                   {"pose_file", pose_path},
                   {"pose", pose_json(s.pose)},
                   {"camera", cam},
                   {"sampler", sampler_json},
                   {"valid_pixels", s.map.valid_count()}};
    manifest += record.dump() + "\n";
  }
  write_file(dir / "manifest.jsonl", manifest);
}

}  // namespace ossireg
