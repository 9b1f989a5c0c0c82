#include <gtest/gtest.h>

#include <cmath>

#include "ossireg/error.hpp"
#include "ossireg/parameterization.hpp"
#include "ossireg/shapes.hpp"

using namespace ossireg;

namespace {

struct Case {
  std::shared_ptr<const TriangleMesh> mesh;
  SurfaceParameterization param;
};

const Case& sphere_case() {
  static const Case c = [] {
    auto mesh = std::make_shared<const TriangleMesh>(make_icosphere(4));
    auto region = std::make_shared<const RegionMesh>(extract_full_region(mesh));
    return Case{mesh, parameterize(region, 0, 1)};
  }();
  return c;
}

const PatchShape kShape;

const Case& patch_case() {
  static const Case c = [] {
    auto mesh = std::make_shared<const TriangleMesh>(make_dome_patch(kShape));
    auto region = std::make_shared<const RegionMesh>(extract_full_region(mesh));
    return Case{mesh, parameterize(region, dome_patch_vertex(kShape, 8, kShape.half_rows),
                                   dome_patch_vertex(kShape, 72, kShape.half_rows))};
  }();
  return c;
}

}  // namespace

TEST(Latitude, Arithmetic) {
  EXPECT_EQ(latitude(0.0, 3.0), 0.0);
  EXPECT_EQ(latitude(2.0, 6.0), 0.25);
  EXPECT_EQ(latitude(5.0, 0.0), 1.0);
  EXPECT_THROW(latitude(0.0, 0.0), Error);
  EXPECT_EQ(longitude(1.0, 3.0), 0.25);
  EXPECT_EQ(longitude(0.0, 0.0), 0.0);
}

TEST(Parameterize, PolesAndRange) {
  for (const Case* c : {&sphere_case(), &patch_case()}) {
    const auto& p = c->param;
    EXPECT_EQ(p.mu[p.alpha], 0.0);
    EXPECT_EQ(p.mu[p.beta], 1.0);
    for (size_t i = 0; i < p.mu.size(); ++i) {
      EXPECT_GE(p.mu[i], 0.0);
      EXPECT_LE(p.mu[i], 1.0);
      EXPECT_GE(p.nu[i], 0.0);
      EXPECT_LE(p.nu[i], 1.0);
    }
    for (size_t i = 0; i < p.cut_mu.size(); ++i) {
      EXPECT_GE(p.cut_nu[i], 0.0);
      EXPECT_LE(p.cut_nu[i], 1.0);
    }
  }
}

TEST(Parameterize, SphereEquatorAtHalfLatitude) {
  const auto& c = sphere_case();
  int checked = 0;
  for (int v = 0; v < c.mesh->vertex_count(); ++v) {
    if (std::abs(c.mesh->vertices()[v].z()) < 1e-9) {
      EXPECT_NEAR(c.param.mu[v], 0.5, 0.02) << v;
      ++checked;
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Parameterize, SphereAntimeridianAtHalfLongitude) {
  const auto& c = sphere_case();
  // Direction of the cut, taken from the meridian's middle sample.
  const Vec3 mid = c.param.meridian.points[c.param.meridian.points.size() / 2].position;
  const Vec3 cut_dir = Vec3(mid.x(), mid.y(), 0.0).normalized();
  int best = -1;
  double best_dot = 1.0;
  for (int v = 0; v < c.mesh->vertex_count(); ++v) {
    const Vec3& p = c.mesh->vertices()[v];
    if (std::abs(p.z()) > 1e-9) continue;
    const double d = cut_dir.dot(p);
    if (d < best_dot) {
      best_dot = d;
      best = v;
    }
  }
  ASSERT_GE(best, 0);
  EXPECT_LT(best_dot, -0.99);
  EXPECT_NEAR(c.param.nu[best], 0.5, 0.02);
}

TEST(Parameterize, LatitudeIncreasesAlongMeridian) {
  for (const Case* c : {&sphere_case(), &patch_case()}) {
    const auto& m = c->param.meridian_mu;
    ASSERT_EQ(m.size(), c->param.meridian.points.size());
    EXPECT_EQ(m.front(), 0.0);
    EXPECT_EQ(m.back(), 1.0);
    for (size_t i = 1; i < m.size(); ++i) EXPECT_GT(m[i], m[i - 1]) << i;
  }
}

TEST(Parameterize, PatchSymmetry) {
  const auto& c = patch_case();
  // Poles mirror each other across the middle column.
  for (int r = 0; r <= 2 * kShape.half_rows; ++r) {
    EXPECT_NEAR(c.param.mu[dome_patch_vertex(kShape, kShape.half_columns, r)], 0.5, 0.02) << r;
  }
  // Beyond the poles, both sides of the cut are equally far.
  for (int col : {0, 4, 76, 80}) {
    EXPECT_NEAR(c.param.nu[dome_patch_vertex(kShape, col, kShape.half_rows)], 0.5, 0.02) << col;
  }
}

TEST(Parameterize, SeamCopiesCarryBothSides) {
  const auto& p = patch_case().param;
  for (size_t k = 1; k + 1 < p.cut.left_vertex.size(); ++k) {
    EXPECT_EQ(p.cut_nu[p.cut.left_vertex[k]] + p.cut_nu[p.cut.right_vertex[k]], 1.0) << k;
    EXPECT_EQ(p.cut_mu[p.cut.left_vertex[k]], p.cut_mu[p.cut.right_vertex[k]]);
  }
}

TEST(Parameterize, PoleOutsideRegionRejected) {
  auto mesh = std::make_shared<const TriangleMesh>(make_icosphere(2));
  std::vector<int> ids;
  for (int v = 0; v < mesh->vertex_count(); ++v) {
    if (mesh->vertices()[v].z() > -0.2) ids.push_back(v);
  }
  auto region = std::make_shared<const RegionMesh>(extract_region(mesh, ids));
  EXPECT_THROW(parameterize(region, 0, 1), Error);
  EXPECT_THROW(parameterize(region, 0, 0), Error);
}

TEST(Parameterize, Deterministic) {
  auto mesh = std::make_shared<const TriangleMesh>(make_icosphere(3));
  auto region = std::make_shared<const RegionMesh>(extract_full_region(mesh));
  const auto a = parameterize(region, 0, 1);
  const auto b = parameterize(region, 0, 1);
  EXPECT_EQ(format_parameterization(a), format_parameterization(b));
}

TEST(Transfer, IdentityAndScaledMorph) {
  const auto& c = patch_case();
  const SurfaceParameterization same = transfer_parameterization(c.param, c.mesh);
  EXPECT_EQ(same.mu, c.param.mu);
  EXPECT_EQ(same.nu, c.param.nu);
  EXPECT_EQ(same.cut_nu, c.param.cut_nu);

  std::vector<Vec3> scaled = c.mesh->vertices();
  for (Vec3& p : scaled) p *= 2.0;
  auto big = std::make_shared<const TriangleMesh>(c.mesh->with_positions(scaled));
  const SurfaceParameterization moved = transfer_parameterization(c.param, big);
  EXPECT_EQ(moved.mu, c.param.mu);
  EXPECT_EQ(moved.nu, c.param.nu);
  EXPECT_NEAR(moved.meridian.length(), 2.0 * c.param.meridian.length(), 1e-9);
  EXPECT_EQ(moved.cut.mesh.positions[moved.cut.refined_vertex_count],
            2.0 * c.param.cut.mesh.positions[c.param.cut.refined_vertex_count]);
}

TEST(Transfer, VertexCountMismatch) {
  auto other = std::make_shared<const TriangleMesh>(make_icosphere(2));
  EXPECT_THROW(transfer_parameterization(patch_case().param, other), Error);
}

TEST(ParameterizationFile, RoundTripIsExact) {
  const auto& c = patch_case();
  const std::string text = format_parameterization(c.param);
  const SurfaceParameterization back = parse_parameterization(text, c.mesh);
  EXPECT_EQ(back.mu, c.param.mu);
  EXPECT_EQ(back.nu, c.param.nu);
  EXPECT_EQ(back.cut_mu, c.param.cut_mu);
  EXPECT_EQ(back.cut_nu, c.param.cut_nu);
  EXPECT_EQ(back.alpha_parent(), c.param.alpha_parent());
  EXPECT_EQ(back.cut.mesh.faces, c.param.cut.mesh.faces);
  EXPECT_EQ(format_parameterization(back), text);
}

TEST(ParameterizationFile, WrongMeshOrGarbage) {
  const auto& c = patch_case();
  const std::string text = format_parameterization(c.param);
  auto other = std::make_shared<const TriangleMesh>(make_icosphere(2));
  EXPECT_THROW(parse_parameterization(text, other), Error);
  EXPECT_THROW(parse_parameterization("not a parameterization", c.mesh), Error);
  EXPECT_THROW(parse_parameterization(text.substr(0, text.size() / 2), c.mesh), Error);
}
