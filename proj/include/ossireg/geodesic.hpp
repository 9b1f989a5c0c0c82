#pragma once

#include <span>
#include <vector>

#include "ossireg/mesh.hpp"

namespace ossireg {

/// Per-vertex first-arrival distance (mm) from a source set.
struct DistanceField {
  std::vector<double> values;
  /// Vertices where the field is exactly zero.
  std::vector<int> sources;
};

struct FastMarchOptions {
  /// How many triangles may be unfolded when searching for an acute support
  /// of an obtuse update.
  int max_unfold_steps = 8;
};

/// A point on the surface, expressed in one face. `face` is a face that
/// contains both this point and the previous point of the path (for the first
/// point: the next point).
struct PathPoint {
  Vec3 position = Vec3::Zero();
  int face = -1;
  Vec3 barycentric = Vec3::Zero();  ///< weights of faces[face][0..2]
};

struct GeodesicPath {
  std::vector<PathPoint> points;
  /// True when steepest descent was replaced by the edge-graph shortest path.
  bool edge_fallback = false;

  double length() const;
};

/// sum_k barycentric[k] * positions[faces[face][k]], in slot order. Every
/// producer of path positions goes through this so they are reproducible.
Vec3 point_on_face(const SurfaceMesh& mesh, int face, const Vec3& barycentric);

DistanceField fast_march(const SurfaceMesh& mesh, std::span<const int> sources,
                         const FastMarchOptions& options = {});
DistanceField fast_march(const RegionMesh& region, std::span<const int> sources,
                         const FastMarchOptions& options = {});
/// Distance to a polyline lying on the surface. Vertices of the faces the path
/// crosses are initialized with their in-plane distance to the path segments.
DistanceField fast_march(const SurfaceMesh& mesh, const GeodesicPath& sources,
                         const FastMarchOptions& options = {});

/// Shortest edge-graph distances (Dijkstra).
std::vector<double> edge_graph_distances(const SurfaceMesh& mesh,
                                         std::span<const int> sources);
/// Shortest edge-graph path from `from` to `to`, as vertex indices.
std::vector<int> edge_graph_path(const SurfaceMesh& mesh, int from, int to);

struct TraceOptions {
  int max_steps = 1000000;
  /// Exit points closer than this (edge parameter) to a vertex snap onto it.
  double snap = 1e-9;
  /// Relative slack under which an edge move is preferred over an in-face move.
  double edge_preference = 1e-9;
};

/// Steepest descent on a single-source field from `alpha` down to the source.
GeodesicPath trace_meridian(const SurfaceMesh& mesh,
                            const DistanceField& field_from_beta, int alpha,
                            const TraceOptions& options = {});

/// Region mesh cut open along a meridian. The first `region_vertex_count`
/// vertices are the region's vertices, followed by vertices inserted where the
/// meridian crosses edges, followed by right-hand copies of the interior
/// meridian samples.
struct CutSurface {
  SurfaceMesh mesh;
  int region_vertex_count = 0;
  /// Region vertices plus inserted edge crossings (the mesh before splitting).
  int refined_vertex_count = 0;
  /// Per meridian point: its vertex on the left side of the cut.
  std::vector<int> left_vertex;
  /// Per meridian point: its vertex on the right side (same as left for the
  /// two endpoints, which are not duplicated).
  std::vector<int> right_vertex;
  std::vector<int> left_sources;
  std::vector<int> right_sources;
  /// For every vertex at index >= refined_vertex_count, the vertex it copies.
  std::vector<int> copy_of;

  int duplicated_count() const {
    return mesh.vertex_count() - refined_vertex_count;
  }
};

/// Inserts the meridian into the mesh and splits it there. A face that has the
/// directed edge (next, sample) in its winding is on the left of the path
/// direction sample->next; left faces keep the original vertex, right faces get
/// the copy.
CutSurface cut_along_meridian(const SurfaceMesh& mesh, const GeodesicPath& meridian);

}  // namespace ossireg
