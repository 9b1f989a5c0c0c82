#pragma once

#include "ossireg/mesh.hpp"

namespace ossireg {

/// Geodesic sphere from a subdivided icosahedron, outward winding. Vertex 0 is
/// at (0,0,+r) and vertex 1 at (0,0,-r).
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0);

struct PatchShape {
  int half_columns = 40;      ///< grid has 2*half_columns+1 vertices along x
  int half_rows = 30;         ///< and 2*half_rows+1 along y
  double width_mm = 4.0;
  double height_mm = 3.0;
  double bump_mm = 0.8;       ///< gaussian dome height, 0 gives a flat patch
  double sigma_x_mm = 1.2;
  double sigma_y_mm = 0.9;
  /// Mirror-symmetric diagonals about both axes when true, otherwise every
  /// quad is split along the same diagonal.
  bool symmetric = true;
};

/// Open, dome-shaped sheet over a rectangular grid with normals along +z.
/// A small stand-in for the visible ossicle surface.
TriangleMesh make_dome_patch(const PatchShape& shape = {});

/// Vertex index of grid node (column, row) in make_dome_patch, counted from the
/// lower-left corner.
int dome_patch_vertex(const PatchShape& shape, int column, int row);

}  // namespace ossireg
