#include "ossireg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ossireg/error.hpp"

namespace ossireg {
namespace {

double edge_function(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// For triangles with positive edge_function area (clockwise on screen, since
// v grows downward), top edges run in +x and left edges run in -y.
bool is_top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

bool inside(double w, bool top_left) { return w > 0.0 || (w == 0.0 && top_left); }

struct ScreenTriangle {
  std::array<Eigen::Vector2d, 3> screen;
  std::array<double, 3> inv_z;
  std::array<int, 3> slot;  // screen vertex -> face slot
  double area = 0.0;
};

void raster_band(const std::vector<ScreenTriangle>& tris,
                 const std::vector<int>& tri_face, int y_begin, int y_end,
                 RasterBuffer& out) {
  for (size_t t = 0; t < tris.size(); ++t) {
    const ScreenTriangle& tri = tris[t];
    const auto& s = tri.screen;
    const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
    const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
    const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
    const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(max_x - 0.5)));
    const int y0 = std::max(y_begin, static_cast<int>(std::ceil(min_y - 0.5)));
    const int y1 = std::min(y_end - 1, static_cast<int>(std::floor(max_y - 0.5)));
    if (x0 > x1 || y0 > y1) continue;

    const bool tl0 = is_top_left(s[1], s[2]);
    const bool tl1 = is_top_left(s[2], s[0]);
    const bool tl2 = is_top_left(s[0], s[1]);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        const double w0 = edge_function(s[1], s[2], p);
        const double w1 = edge_function(s[2], s[0], p);
        const double w2 = edge_function(s[0], s[1], p);
        if (!inside(w0, tl0) || !inside(w1, tl1) || !inside(w2, tl2)) continue;

        const double l0 = w0 / tri.area, l1 = w1 / tri.area, l2 = w2 / tri.area;
        const double inv_z = l0 * tri.inv_z[0] + l1 * tri.inv_z[1] + l2 * tri.inv_z[2];
        const double z = 1.0 / inv_z;
        const int i = out.index(x, y);
        if (out.face[i] >= 0 && !(z < out.depth[i])) continue;

        std::array<double, 3> bary{};
        bary[tri.slot[0]] = l0 * tri.inv_z[0] * z;
        bary[tri.slot[1]] = l1 * tri.inv_z[1] * z;
        bary[tri.slot[2]] = l2 * tri.inv_z[2] * z;
        out.face[i] = tri_face[t];
        out.barycentric[i] = bary;
        out.depth[i] = z;
      }
    }
  }
}

}  // namespace

RasterBuffer rasterize(const SurfaceMesh& mesh, const CameraModel& camera,
                       const Pose& pose, const RasterOptions& options) {
  camera.validate();
  RasterBuffer out;
  out.width = camera.width;
  out.height = camera.height;
  const size_t n = static_cast<size_t>(camera.width) * camera.height;
  out.face.assign(n, -1);
  out.barycentric.assign(n, {0.0, 0.0, 0.0});
  out.depth.assign(n, 0.0);

  std::vector<Vec3> cam(mesh.positions.size());
  for (size_t v = 0; v < cam.size(); ++v) cam[v] = pose.apply(mesh.positions[v]);

  std::vector<ScreenTriangle> tris;
  std::vector<int> tri_face;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces[f];
    const Vec3& p0 = cam[face[0]];
    const Vec3& p1 = cam[face[1]];
    const Vec3& p2 = cam[face[2]];
    if (!(p0.z() > 0.0 && p1.z() > 0.0 && p2.z() > 0.0)) continue;
    if (options.cull_back_faces && !((p1 - p0).cross(p2 - p0).dot(p0) < 0.0)) continue;

    ScreenTriangle tri;
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = cam[face[k]];
      tri.screen[k] = {camera.focal * p.x() / p.z() + camera.cx,
                       camera.focal * p.y() / p.z() + camera.cy};
      tri.inv_z[k] = 1.0 / p.z();
      tri.slot[k] = k;
    }
    tri.area = edge_function(tri.screen[0], tri.screen[1], tri.screen[2]);
    if (tri.area == 0.0 || !std::isfinite(tri.area)) continue;
    if (tri.area < 0.0) {
      std::swap(tri.screen[1], tri.screen[2]);
      std::swap(tri.inv_z[1], tri.inv_z[2]);
      std::swap(tri.slot[1], tri.slot[2]);
      tri.area = -tri.area;
    }
    tris.push_back(tri);
    tri_face.push_back(f);
  }

  const int bands = std::clamp(options.bands, 1, std::max(1, camera.height));
  if (bands == 1) {
    raster_band(tris, tri_face, 0, camera.height, out);
    return out;
  }
  std::vector<std::thread> workers;
  for (int b = 0; b < bands; ++b) {
    const int y_begin = static_cast<int>(static_cast<long>(camera.height) * b / bands);
    const int y_end = static_cast<int>(static_cast<long>(camera.height) * (b + 1) / bands);
    workers.emplace_back([&, y_begin, y_end] {
      raster_band(tris, tri_face, y_begin, y_end, out);
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

CoordinateMap::CoordinateMap(int width, int height, bool with_depth)
    : width(width), height(height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidInput, "coordinate map: size must be positive");
  }
  const size_t n = static_cast<size_t>(width) * height;
  mu.assign(n, 0.0);
  nu.assign(n, 0.0);
  valid.assign(n, 0);
  if (with_depth) depth.assign(n, 0.0);
}

int CoordinateMap::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), 1));
}

CoordinateMap render_coordinate_map(const SurfaceMesh& mesh, std::span<const double> mu,
                                    std::span<const double> nu, const CameraModel& camera,
                                    const Pose& pose, const RasterOptions& options) {
  if (mu.size() != mesh.positions.size() || nu.size() != mesh.positions.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "render_coordinate_map: per-vertex values do not match the mesh");
  }
  const RasterBuffer buffer = rasterize(mesh, camera, pose, options);
  CoordinateMap map(camera.width, camera.height);
  for (size_t i = 0; i < buffer.face.size(); ++i) {
    if (buffer.face[i] < 0) continue;
    const Face& f = mesh.faces[buffer.face[i]];
    const auto& b = buffer.barycentric[i];
    const double m = b[0] * mu[f[0]] + b[1] * mu[f[1]] + b[2] * mu[f[2]];
    const double n = b[0] * nu[f[0]] + b[1] * nu[f[1]] + b[2] * nu[f[2]];
    map.mu[i] = std::clamp(m, 0.0, 1.0);
    map.nu[i] = std::clamp(n, 0.0, 1.0);
    map.valid[i] = 1;
    map.depth[i] = buffer.depth[i];
  }
  return map;
}

CoordinateMap render_coordinate_map(const SurfaceParameterization& param,
                                    const CameraModel& camera, const Pose& pose,
                                    const RasterOptions& options) {
  return render_coordinate_map(param.cut.mesh, param.cut_mu, param.cut_nu, camera, pose,
                               options);
}

std::array<std::uint8_t, 3> overlay_color(double mu, double nu) {
  return {static_cast<std::uint8_t>(std::lround(std::clamp(mu, 0.0, 1.0) * 255.0)),
          static_cast<std::uint8_t>(std::lround(std::clamp(nu, 0.0, 1.0) * 255.0)), 0};
}

Image8 blend_overlay(const CoordinateMap& map, const Image8& background, double opacity) {
  if (background.width != map.width || background.height != map.height) {
    throw Error(ErrorCode::kInvalidInput, "overlay: background is " +
                                              std::to_string(background.width) + "x" +
                                              std::to_string(background.height) +
                                              ", expected " + std::to_string(map.width) +
                                              "x" + std::to_string(map.height));
  }
  if (background.channels != 3 && background.channels != 4) {
    throw Error(ErrorCode::kInvalidInput, "overlay: background must be RGB or RGBA");
  }
  if (!(opacity >= 0.0 && opacity <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "overlay: opacity must be in [0, 1]");
  }
  Image8 out(map.width, map.height, 4);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const std::uint8_t* bg = background.at(x, y);
      std::uint8_t* px = out.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = bg[c];
      px[3] = background.channels == 4 ? bg[3] : 255;
      const int i = map.index(x, y);
      if (!map.valid[i]) continue;
      const auto fg = overlay_color(map.mu[i], map.nu[i]);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<std::uint8_t>(
            std::lround((1.0 - opacity) * bg[c] + opacity * fg[c]));
      }
    }
  }
  return out;
}

Image8 render_overlay(const SurfaceParameterization& param, const CameraModel& camera,
                      const Pose& pose, const Image8& background, double opacity,
                      const RasterOptions& options) {
  if (background.width != camera.width || background.height != camera.height) {
    throw Error(ErrorCode::kInvalidInput, "overlay: background size does not match camera");
  }
  return blend_overlay(render_coordinate_map(param, camera, pose, options), background,
                       opacity);
}

}  // namespace ossireg
