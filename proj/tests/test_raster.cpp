#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ossireg/image.hpp"
#include "ossireg/raster.hpp"

using namespace ossireg;

namespace {

const CameraModel kCam = CameraModel::centered(64, 48, 100.0);

// Faces the camera when the signed pixel-space area (x right, y down) is negative.
SurfaceMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) { return {{a, b, c}, {{0, 1, 2}}}; }

// Pixel (x, y) lies on the camera ray through its center at depth z.
Vec3 at_pixel(double x, double y, double z) {
  return Vec3((x - kCam.cx) * z / kCam.focal, (y - kCam.cy) * z / kCam.focal, z);
}

// 2D barycentric weights of p in (a, b, c).
Vec3 barycentric_2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                    const Eigen::Vector2d& p) {
  const auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const double area = cross(b - a, c - a);
  return Vec3(cross(b - p, c - p) / area, cross(c - p, a - p) / area, cross(a - p, b - p) / area);
}

}  // namespace

TEST(Rasterize, BehindCameraIsEmpty) {
  const SurfaceMesh m = triangle(Vec3(-1, -1, -5), Vec3(1, -1, -5), Vec3(0, 1, -5));
  const std::vector<double> mu = {0, 0.5, 1}, nu = {0, 1, 0.5};
  const CoordinateMap map = render_coordinate_map(m, mu, nu, kCam, Pose{});
  EXPECT_EQ(map.valid_count(), 0);
  // A triangle crossing the camera plane is skipped too.
  const SurfaceMesh crossing = triangle(Vec3(-1, -1, -5), Vec3(1, -1, 5), Vec3(0, 1, 5));
  EXPECT_EQ(render_coordinate_map(crossing, mu, nu, kCam, Pose{}).valid_count(), 0);
}

TEST(Rasterize, ParallelTriangleMatchesClosedForm) {
  const double z = 50.0;
  const SurfaceMesh m =
      triangle(at_pixel(5.3, 4.1, z), at_pixel(20.2, 44.9, z), at_pixel(58.7, 9.6, z));
  const std::vector<double> mu = {0.1, 0.4, 0.9}, nu = {0.2, 0.95, 0.3};
  const CoordinateMap map =
      decode_map(encode_map(render_coordinate_map(m, mu, nu, kCam, Pose{})));
  const Eigen::Vector2d a(5.3, 4.1), b(20.2, 44.9), c(58.7, 9.6);
  int covered = 0;
  for (int y = 0; y < kCam.height; ++y) {
    for (int x = 0; x < kCam.width; ++x) {
      const Vec3 w = barycentric_2d(a, b, c, Eigen::Vector2d(x + 0.5, y + 0.5));
      const bool inside = w.minCoeff() > 1e-9;
      const int i = map.index(x, y);
      if (w.minCoeff() > 1e-9 || w.minCoeff() < -1e-9) {
        EXPECT_EQ(static_cast<bool>(map.valid[i]), inside) << x << "," << y;
      }
      if (!map.valid[i]) continue;
      ++covered;
      EXPECT_NEAR(map.mu[i], w.dot(Vec3(mu[0], mu[1], mu[2])), 1e-4);
      EXPECT_NEAR(map.nu[i], w.dot(Vec3(nu[0], nu[1], nu[2])), 1e-4);
    }
  }
  // Area of the triangle in pixels, roughly.
  const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  EXPECT_NEAR(covered, area, 0.1 * area);
}

TEST(Rasterize, PerspectiveCorrectOnTiltedTriangle) {
  const SurfaceMesh m = triangle(at_pixel(4, 4, 30), at_pixel(12, 44, 140), at_pixel(60, 10, 80));
  const RasterBuffer buf = rasterize(m, kCam, Pose{});
  int covered = 0;
  for (int y = 0; y < kCam.height; ++y) {
    for (int x = 0; x < kCam.width; ++x) {
      const int i = buf.index(x, y);
      if (buf.face[i] < 0) continue;
      ++covered;
      const auto& w = buf.barycentric[i];
      EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-12);
      const Vec3 p = w[0] * m.positions[0] + w[1] * m.positions[1] + w[2] * m.positions[2];
      const Eigen::Vector2d px = project(kCam, Pose{}, p);
      EXPECT_NEAR(px.x(), x + 0.5, 1e-9);
      EXPECT_NEAR(px.y(), y + 0.5, 1e-9);
      EXPECT_NEAR(buf.depth[i], p.z(), 1e-9);
    }
  }
  EXPECT_GT(covered, 500);
}

// Triangles of a fan around a shared center cover every pixel of the polygon
// exactly once.
TEST(Rasterize, SharedEdgesCoverPixelsOnce) {
  const int sides = 12;
  std::vector<Vec3> rim;
  for (int k = 0; k < sides; ++k) {
    const double a = 2.0 * M_PI * k / sides;
    rim.push_back(at_pixel(32.0 + 20.0 * std::cos(a), 24.0 + 20.0 * std::sin(a), 40.0));
  }
  const Vec3 center = at_pixel(32.0, 24.0, 40.0);
  // Points on pixel-center lattice lines stress the tie rule.
  rim[0] = at_pixel(52.5, 24.5, 40.0);
  std::vector<int> count(kCam.width * kCam.height, 0);
  SurfaceMesh fan;
  fan.positions.push_back(center);
  for (const Vec3& p : rim) fan.positions.push_back(p);
  for (int k = 0; k < sides; ++k) {
    // Image v grows downward, so increasing angle is clockwise on screen;
    // wind the other way to face the camera.
    const Face f = {0, 1 + (k + 1) % sides, 1 + k};
    fan.faces.push_back(f);
    const SurfaceMesh one = triangle(fan.positions[f[0]], fan.positions[f[1]], fan.positions[f[2]]);
    const RasterBuffer b = rasterize(one, kCam, Pose{});
    for (size_t i = 0; i < count.size(); ++i) count[i] += b.face[i] >= 0;
  }
  const RasterBuffer whole = rasterize(fan, kCam, Pose{});
  int total = 0;
  for (size_t i = 0; i < count.size(); ++i) {
    EXPECT_LE(count[i], 1) << i;
    EXPECT_EQ(count[i] == 1, whole.face[i] >= 0) << i;
    total += count[i];
  }
  EXPECT_GT(total, 1000);
}

TEST(Rasterize, NearestWinsAndTiesKeepLowerFace) {
  SurfaceMesh m;
  const auto add = [&](double z) {
    const int base = m.vertex_count();
    m.positions.push_back(at_pixel(0, 0, z));
    m.positions.push_back(at_pixel(64, 0, z));
    m.positions.push_back(at_pixel(0, 48, z));
    m.faces.push_back({base, base + 2, base + 1});
  };
  // Winding chosen to face the camera: check with culling off first.
  add(200.0);
  add(100.0);
  RasterOptions no_cull;
  no_cull.cull_back_faces = false;
  RasterBuffer b = rasterize(m, kCam, Pose{}, no_cull);
  EXPECT_EQ(b.face[b.index(2, 2)], 1);
  EXPECT_NEAR(b.depth[b.index(2, 2)], 100.0, 1e-9);
  m.positions.clear();
  m.faces.clear();
  add(100.0);
  add(100.0);
  b = rasterize(m, kCam, Pose{}, no_cull);
  EXPECT_EQ(b.face[b.index(2, 2)], 0);
}

TEST(Rasterize, BackFacesCulled) {
  const SurfaceMesh front = triangle(at_pixel(5, 5, 50), at_pixel(5, 40, 50), at_pixel(60, 5, 50));
  const SurfaceMesh back = triangle(at_pixel(5, 5, 50), at_pixel(60, 5, 50), at_pixel(5, 40, 50));
  const auto covered = [](const RasterBuffer& b) {
    return std::count_if(b.face.begin(), b.face.end(), [](int f) { return f >= 0; });
  };
  RasterOptions keep;
  keep.cull_back_faces = false;
  EXPECT_GT(covered(rasterize(front, kCam, Pose{})), 0);
  EXPECT_EQ(covered(rasterize(back, kCam, Pose{})), 0);
  EXPECT_EQ(covered(rasterize(back, kCam, Pose{}, keep)), covered(rasterize(front, kCam, Pose{})));
}

TEST(Rasterize, BandsDoNotChangeOutput) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfaceMesh m;
  for (int t = 0; t < 40; ++t) {
    const int base = m.vertex_count();
    for (int k = 0; k < 3; ++k) {
      m.positions.push_back(at_pixel(64 * u(rng), 48 * u(rng), 20 + 100 * u(rng)));
    }
    m.faces.push_back({base, base + 1, base + 2});
  }
  RasterOptions one, many;
  one.cull_back_faces = many.cull_back_faces = false;
  many.bands = 5;
  const RasterBuffer a = rasterize(m, kCam, Pose{}, one);
  const RasterBuffer b = rasterize(m, kCam, Pose{}, many);
  EXPECT_EQ(a.face, b.face);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.barycentric, b.barycentric);
}

TEST(Overlay, OpacityEndpointsAndBlend) {
  CoordinateMap map(2, 1, false);
  map.valid[1] = 1;
  map.mu[1] = 0.4;
  map.nu[1] = 1.0;
  Image8 bg(2, 1, 3);
  bg.pixels = {10, 20, 30, 200, 100, 50};

  const Image8 zero = blend_overlay(map, bg, 0.0);
  ASSERT_EQ(zero.channels, 4);
  for (int x = 0; x < 2; ++x) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(zero.at(x, 0)[k], bg.at(x, 0)[k]);
    EXPECT_EQ(zero.at(x, 0)[3], 255);
  }
  const Image8 full = blend_overlay(map, bg, 1.0);
  const auto color = overlay_color(0.4, 1.0);
  EXPECT_EQ(color, (std::array<std::uint8_t, 3>{102, 255, 0}));
  for (int k = 0; k < 3; ++k) EXPECT_EQ(full.at(1, 0)[k], color[k]);
  EXPECT_EQ(full.at(0, 0)[0], 10);

  // 0.25 * (102, 255, 0) + 0.75 * (200, 100, 50) = (175.5, 138.75, 37.5).
  const Image8 quarter = blend_overlay(map, bg, 0.25);
  EXPECT_EQ(quarter.at(1, 0)[0], 176);
  EXPECT_EQ(quarter.at(1, 0)[1], 139);
  EXPECT_EQ(quarter.at(1, 0)[2], 38);

  Image8 rgba(2, 1, 4, 77);
  EXPECT_EQ(blend_overlay(map, rgba, 0.5).at(1, 0)[3], 77);
  EXPECT_THROW(blend_overlay(map, Image8(3, 1, 3), 0.5), std::exception);
  EXPECT_THROW(blend_overlay(map, bg, 1.5), std::exception);
}
