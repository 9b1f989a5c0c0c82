#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ossireg/correspondence.hpp"
#include "ossireg/error.hpp"
#include "ossireg/image.hpp"
#include "ossireg/shapes.hpp"

using namespace ossireg;

namespace {

const PatchShape kShape;

const SurfaceParameterization& patch_param() {
  static const SurfaceParameterization p = [] {
    auto mesh = std::make_shared<const TriangleMesh>(make_dome_patch(kShape));
    auto region = std::make_shared<const RegionMesh>(extract_full_region(mesh));
    return parameterize(region, dome_patch_vertex(kShape, 8, kShape.half_rows),
                        dome_patch_vertex(kShape, 72, kShape.half_rows));
  }();
  return p;
}

Pose facing_pose(double spin, double depth) {
  Pose pose;
  pose.rotation = rotation_from_vector(Vec3(0, 0, spin)) *
                  rotation_from_vector(Vec3(0.3, -0.2, 0)) *
                  rotation_from_vector(Vec3(M_PI, 0, 0));
  pose.translation = Vec3(0.5, -0.3, depth);
  return pose;
}

}  // namespace

TEST(ParameterIndex, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mu(500), nu(500);
  for (int i = 0; i < 500; ++i) {
    mu[i] = u(rng);
    nu[i] = u(rng) * 0.3;  // uneven density
  }
  const ParameterIndex index(mu, nu);
  for (int q = 0; q < 2000; ++q) {
    const double a = u(rng), b = u(rng);
    int best = 0;
    double best_d = 1e300;
    for (int i = 0; i < 500; ++i) {
      const double d = (mu[i] - a) * (mu[i] - a) + (nu[i] - b) * (nu[i] - b);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    EXPECT_EQ(index.nearest(a, b), best);
  }
}

TEST(ParameterIndex, TiesGoToLowestIndex) {
  const std::vector<double> mu = {0.5, 0.2, 0.5}, nu = {0.5, 0.2, 0.5};
  EXPECT_EQ(ParameterIndex(mu, nu).nearest(0.5, 0.5), 0);
  EXPECT_EQ(ParameterIndex(mu, nu).nearest(0.51, 0.49), 0);
}

TEST(ParameterFaceIndex, LocatesAndInterpolates) {
  const SurfaceMesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 1), Vec3(0, 1, 0)},
                      {{0, 1, 2}, {0, 2, 3}}};
  const std::vector<double> mu = {0.1, 0.9, 0.9, 0.1}, nu = {0.1, 0.1, 0.9, 0.9};
  const ParameterFaceIndex index(m, mu, nu);
  EXPECT_EQ(index.ill_conditioned_count(), 0);
  const auto hit = index.locate(0.7, 0.3);
  ASSERT_EQ(hit.status, ParameterFaceIndex::Status::kFound);
  EXPECT_EQ(hit.face, 0);
  double a = 0, b = 0;
  for (int k = 0; k < 3; ++k) {
    a += hit.barycentric[k] * mu[m.faces[0][k]];
    b += hit.barycentric[k] * nu[m.faces[0][k]];
  }
  EXPECT_NEAR(a, 0.7, 1e-12);
  EXPECT_NEAR(b, 0.3, 1e-12);
  EXPECT_EQ(index.locate(0.05, 0.5).status, ParameterFaceIndex::Status::kOutside);
  // On the shared diagonal the lower face wins.
  EXPECT_EQ(index.locate(0.5, 0.5).face, 0);
}

TEST(ParameterFaceIndex, FoldedFaceMakesNeighbourhoodAmbiguous) {
  // The second face is flipped in parameter space and overlaps the first.
  const SurfaceMesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)},
                      {{0, 1, 2}, {1, 3, 2}, {0, 2, 3}}};
  const std::vector<double> mu = {0.1, 0.5, 0.1, 0.2}, nu = {0.1, 0.1, 0.5, 0.2};
  const ParameterFaceIndex index(m, mu, nu);
  EXPECT_TRUE(index.ill_conditioned(1));
  EXPECT_FALSE(index.ill_conditioned(0));
  EXPECT_EQ(index.locate(0.25, 0.2).status, ParameterFaceIndex::Status::kAmbiguous);
  EXPECT_EQ(index.locate(0.15, 0.12).status, ParameterFaceIndex::Status::kFound);
}

TEST(ParameterFaceIndex, CollapsedFaceOnlyNearItsEdges) {
  const SurfaceMesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)},
                      {{0, 1, 2}, {1, 3, 2}}};
  // Face 1 collapses onto the segment (0.5, 0.1)-(0.1, 0.5).
  const std::vector<double> mu = {0.1, 0.5, 0.1, 0.3}, nu = {0.1, 0.1, 0.5, 0.3};
  const ParameterFaceIndex index(m, mu, nu);
  EXPECT_TRUE(index.ill_conditioned(1));
  EXPECT_EQ(index.locate(0.28, 0.28).status, ParameterFaceIndex::Status::kFound);
  EXPECT_EQ(index.locate(0.3 - 1e-6, 0.3 - 1e-6).status,
            ParameterFaceIndex::Status::kAmbiguous);
}

TEST(ParameterFaceIndex, ClosestSnapsOntoTheBoundary) {
  const SurfaceMesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}};
  const std::vector<double> mu = {0.1, 0.9, 0.1}, nu = {0.1, 0.1, 0.9};
  const ParameterFaceIndex index(m, mu, nu);
  EXPECT_EQ(index.locate(0.5, 0.0999).status, ParameterFaceIndex::Status::kOutside);
  const auto hit = index.closest(0.5, 0.0999, 1e-3);
  ASSERT_EQ(hit.status, ParameterFaceIndex::Status::kFound);
  EXPECT_NEAR(hit.barycentric[0], 0.5, 1e-12);
  EXPECT_NEAR(hit.barycentric[1], 0.5, 1e-12);
  EXPECT_NEAR(hit.barycentric[2], 0.0, 1e-12);
  EXPECT_EQ(index.closest(0.5, 0.05, 1e-3).status, ParameterFaceIndex::Status::kOutside);
}

TEST(Extract, EmptyMapGivesEmptySet) {
  const CoordinateMap map(40, 30, false);
  const CorrespondenceSet set = extract_correspondences(map, patch_param());
  EXPECT_TRUE(set.empty());
  EXPECT_EQ(set.width, 40);
}

TEST(Extract, VertexParametersGiveTheVertex) {
  const auto& p = patch_param();
  const int v = dome_patch_vertex(kShape, 30, 12);
  CoordinateMap map(3, 2, false);
  map.valid[4] = 1;
  map.mu[4] = p.mu[v];
  map.nu[4] = p.nu[v];
  for (LookupMode mode : {LookupMode::kNearestVertex, LookupMode::kInterpolate}) {
    const CorrespondenceSet set = extract_correspondences(map, p, mode);
    ASSERT_EQ(set.size(), 1u);
    EXPECT_EQ(set.items[0].pixel, Eigen::Vector2d(1.5, 1.5));
    EXPECT_LT((set.items[0].point - p.region->surface().positions[v]).norm(), 1e-9);
    if (mode == LookupMode::kNearestVertex) {
      EXPECT_EQ(set.items[0].point, p.region->surface().positions[v]);
    }
  }
}

// Every extracted point lies near the surface point the rasterizer saw.
TEST(Extract, PointsMatchVisibleSurface) {
  const auto& p = patch_param();
  const CameraModel cam = CameraModel::centered(480, 360, 50000.0);
  const double edge = mean_edge_length(p.region->surface());
  const CorrespondenceIndex index = build_correspondence_index(p);
  for (double spin : {0.0, 1.3, -2.4}) {
    const Pose pose = facing_pose(spin, 1500.0);
    const RasterBuffer buf = rasterize(p.cut.mesh, cam, pose);
    const CoordinateMap map = decode_map(encode_map(render_coordinate_map(p, cam, pose)));
    ASSERT_GT(map.valid_count(), 1000);
    for (LookupMode mode : {LookupMode::kNearestVertex, LookupMode::kInterpolate}) {
      const CorrespondenceSet set = extract_correspondences(map, p, index, mode);
      EXPECT_GT(set.size(), 0.9 * map.valid_count());
      std::vector<double> errors;
      for (const Correspondence& c : set.items) {
        const int i = buf.index(static_cast<int>(c.pixel.x()), static_cast<int>(c.pixel.y()));
        ASSERT_GE(buf.face[i], 0);
        const Face& f = p.cut.mesh.faces[buf.face[i]];
        Vec3 truth = Vec3::Zero();
        for (int k = 0; k < 3; ++k) truth += buf.barycentric[i][k] * p.cut.mesh.positions[f[k]];
        errors.push_back((c.point - truth).norm());
      }
      std::sort(errors.begin(), errors.end());
      const double median = errors[errors.size() / 2], worst = errors.back();
      if (mode == LookupMode::kInterpolate) {
        EXPECT_LT(worst, edge) << spin;
        EXPECT_LT(median, 1e-3 * edge) << spin;
      } else {
        // Euclidean nearest in (mu, nu) is not nearest on the surface where
        // the map is anisotropic, so only the typical pixel is within an edge.
        EXPECT_LT(median, edge) << spin;
      }
    }
  }
}

TEST(CorrespondenceFile, RoundTrip) {
  CorrespondenceSet set;
  set.width = 10;
  set.height = 5;
  set.items.push_back({Eigen::Vector2d(1.5, 2.5), Vec3(0.1, -0.2, 1.0 / 3.0), 1.0});
  set.items.push_back({Eigen::Vector2d(9.5, 4.5), Vec3(1e-7, 2.0, -3.5), 0.0});
  const std::string text = format_correspondences(set);
  const CorrespondenceSet back = parse_correspondences(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.width, 10);
  EXPECT_EQ(back.items[0].point, set.items[0].point);
  EXPECT_EQ(back.items[1].weight, 0.0);
  EXPECT_EQ(format_correspondences(back), text);
  EXPECT_THROW(parse_correspondences("ossireg-correspondences 1 10 5 3\n1 2 3 4 5 6\n"), Error);
}
