#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ossireg/camera.hpp"
#include "ossireg/image.hpp"
#include "ossireg/mesh.hpp"
#include "ossireg/parameterization.hpp"

namespace ossireg {

struct RasterOptions {
  bool cull_back_faces = true;
  /// Horizontal bands rasterized in parallel. Output does not depend on it.
  int bands = 1;
};

/// Per-pixel visibility record. face < 0 marks an uncovered pixel.
/// barycentric holds perspective-correct weights for the face's vertex slots.
struct RasterBuffer {
  int width = 0;
  int height = 0;
  std::vector<int> face;
  std::vector<std::array<double, 3>> barycentric;
  std::vector<double> depth;  ///< camera-space z, mm

  int index(int x, int y) const { return y * width + x; }
  bool covered(int x, int y) const { return face[index(x, y)] >= 0; }
};

/// Pixel (x, y) is covered when its center (x + 0.5, y + 0.5) is inside the
/// projected triangle; shared edges follow the top-left rule. Triangles with a
/// vertex at z <= 0 are skipped. Nearest depth wins, ties keep the lower face.
RasterBuffer rasterize(const SurfaceMesh& mesh, const CameraModel& camera,
                       const Pose& pose, const RasterOptions& options = {});

/// (mu, nu) per pixel, with validity and depth.
struct CoordinateMap {
  int width = 0;
  int height = 0;
  std::vector<double> mu;
  std::vector<double> nu;
  std::vector<std::uint8_t> valid;
  std::vector<double> depth;  ///< empty when not available (decoded maps)

  CoordinateMap() = default;
  CoordinateMap(int width, int height, bool with_depth = true);

  int index(int x, int y) const { return y * width + x; }
  int valid_count() const;
};

/// Interpolates per-vertex (mu, nu) over a rasterized surface.
CoordinateMap render_coordinate_map(const SurfaceMesh& mesh, std::span<const double> mu,
                                    std::span<const double> nu, const CameraModel& camera,
                                    const Pose& pose, const RasterOptions& options = {});

/// Renders the cut surface of a parameterization, so that the meridian seam
/// keeps nu = 0 on one side and nu = 1 on the other.
CoordinateMap render_coordinate_map(const SurfaceParameterization& param,
                                    const CameraModel& camera, const Pose& pose,
                                    const RasterOptions& options = {});

/// Color of a covered pixel in overlays: (round(255 mu), round(255 nu), 0).
std::array<std::uint8_t, 3> overlay_color(double mu, double nu);

/// RGBA output. Covered pixels become round((1 - a) * bg + a * fg) per color
/// channel; alpha is copied from the background (255 for RGB backgrounds).
Image8 render_overlay(const SurfaceParameterization& param, const CameraModel& camera,
                      const Pose& pose, const Image8& background, double opacity,
                      const RasterOptions& options = {});
/// Same, from an already rendered map.
Image8 blend_overlay(const CoordinateMap& map, const Image8& background, double opacity);

}  // namespace ossireg
