#include "ossireg/shapes.hpp"

#include <cmath>
#include <map>

#include <Eigen/Geometry>

#include "ossireg/error.hpp"

namespace ossireg {

TriangleMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || radius <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, "make_icosphere: bad arguments");
  }
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  // Vertex order puts (0, 1, phi) first and its antipode second.
  std::vector<Vec3> v = {
      {0, 1, phi},  {0, -1, -phi}, {0, -1, phi}, {0, 1, -phi},
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  const Eigen::Quaterniond align =
      Eigen::Quaterniond::FromTwoVectors(v[0].normalized(), Vec3::UnitZ());
  for (Vec3& p : v) p = align * p.normalized();
  v[0] = Vec3::UnitZ();
  v[1] = -Vec3::UnitZ();

  // Faces of the icosahedron: all triples of mutually adjacent vertices.
  const double edge = (v[0] - v[2]).norm();
  std::vector<Face> faces;
  for (int a = 0; a < 12; ++a)
    for (int b = a + 1; b < 12; ++b)
      for (int c = b + 1; c < 12; ++c) {
        const auto adjacent = [&](int i, int j) {
          return std::abs((v[i] - v[j]).norm() - edge) < 1e-9;
        };
        if (adjacent(a, b) && adjacent(b, c) && adjacent(a, c)) {
          const Vec3 n = (v[b] - v[a]).cross(v[c] - v[a]);
          faces.push_back(n.dot(v[a]) > 0 ? Face{a, b, c} : Face{a, c, b});
        }
      }

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    const auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  for (Vec3& p : v) p *= radius;
  return TriangleMesh(std::move(v), std::move(faces));
}

int dome_patch_vertex(const PatchShape& shape, int column, int row) {
  return row * (2 * shape.half_columns + 1) + column;
}

TriangleMesh make_dome_patch(const PatchShape& shape) {
  if (shape.half_columns < 1 || shape.half_rows < 1 || shape.width_mm <= 0 ||
      shape.height_mm <= 0) {
    throw Error(ErrorCode::kInvalidInput, "make_dome_patch: bad shape");
  }
  const int cols = 2 * shape.half_columns + 1;
  const int rows = 2 * shape.half_rows + 1;
  std::vector<Vec3> v;
  v.reserve(static_cast<size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      // Integer offsets from the center keep the grid exactly mirror-symmetric.
      const double x = shape.width_mm * (c - shape.half_columns) / (cols - 1);
      const double y = shape.height_mm * (r - shape.half_rows) / (rows - 1);
      const double z =
          shape.bump_mm *
          std::exp(-0.5 * (x * x / (shape.sigma_x_mm * shape.sigma_x_mm) +
                           y * y / (shape.sigma_y_mm * shape.sigma_y_mm)));
      v.emplace_back(x, y, z);
    }
  }
  std::vector<Face> faces;
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = dome_patch_vertex(shape, c, r);
      const int b = dome_patch_vertex(shape, c + 1, r);
      const int d = dome_patch_vertex(shape, c, r + 1);
      const int e = dome_patch_vertex(shape, c + 1, r + 1);
      // Quad center sign decides the diagonal so the mesh mirrors about x=0 and
      // y=0.
      const int qx = 2 * c + 1 - 2 * shape.half_columns;
      const int qy = 2 * r + 1 - 2 * shape.half_rows;
      const bool rising = !shape.symmetric || (qx > 0) == (qy > 0);
      if (rising) {
        faces.push_back({a, b, e});
        faces.push_back({a, e, d});
      } else {
        faces.push_back({a, b, d});
        faces.push_back({b, e, d});
      }
    }
  }
  return TriangleMesh(std::move(v), std::move(faces));
}

}  // namespace ossireg
