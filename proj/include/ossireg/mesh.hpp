#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ossireg {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Plain triangle soup with shared vertices. Used as the working surface for
/// geodesic computations (regions, cut meshes).
struct SurfaceMesh {
  std::vector<Vec3> positions;
  std::vector<Face> faces;

  int vertex_count() const { return static_cast<int>(positions.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
};

enum class MeshFormat { kObj, kPly };

/// Indexed triangle mesh, positions in millimeters. Vertex order is never
/// changed after loading: parameterizations are transferred between morphed
/// instances by vertex index.
class TriangleMesh {
 public:
  TriangleMesh() = default;
  /// Validates index range and repeated-vertex faces; throws Error otherwise.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces,
               std::vector<int> labels = {});

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<int>& labels() const { return labels_; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int face_count() const { return static_cast<int>(faces_.size()); }

  /// Same topology, new positions (a morph). Vertex count must match.
  TriangleMesh with_positions(std::vector<Vec3> positions) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<int> labels_;
};

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
/// Picks the format from the file extension (.obj / .ply).
TriangleMesh load_mesh(const std::filesystem::path& path);
TriangleMesh parse_obj(const std::string& text);
TriangleMesh parse_ply(const std::string& bytes);

std::string format_obj(const TriangleMesh& mesh);
enum class PlyEncoding { kAscii, kBinaryLittleEndian };
std::string format_ply(const TriangleMesh& mesh, PlyEncoding encoding);
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
                MeshFormat format,
                PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

/// Connected sub-surface of a parent mesh, induced by a vertex selection.
/// Local vertex i corresponds to parent vertex vertex_ids()[i].
class RegionMesh {
 public:
  std::shared_ptr<const TriangleMesh> parent() const { return parent_; }
  const std::vector<int>& vertex_ids() const { return vertex_ids_; }
  /// Parent vertex index -> local index, -1 when not selected.
  int local_index(int parent_vertex) const;
  int parent_index(int local_vertex) const { return vertex_ids_.at(local_vertex); }
  /// Local faces (indices into vertex_ids()).
  const SurfaceMesh& surface() const { return surface_; }
  int vertex_count() const { return surface_.vertex_count(); }
  int face_count() const { return surface_.face_count(); }
  /// Index of the parent face each local face came from.
  const std::vector<int>& parent_faces() const { return parent_faces_; }

 private:
  friend RegionMesh extract_region(std::shared_ptr<const TriangleMesh>,
                                   std::span<const int>);
  std::shared_ptr<const TriangleMesh> parent_;
  std::vector<int> vertex_ids_;
  std::vector<int> parent_to_local_;
  std::vector<int> parent_faces_;
  SurfaceMesh surface_;
};

/// Selects the faces whose three vertices are all in `vertex_ids`. The
/// selection is sorted and deduplicated. Throws when no face is induced, when
/// the region has more than one edge-connected component, or when the region
/// is not consistently oriented.
RegionMesh extract_region(std::shared_ptr<const TriangleMesh> mesh,
                          std::span<const int> vertex_ids);
RegionMesh extract_full_region(std::shared_ptr<const TriangleMesh> mesh);

/// One 0-based vertex index per line, '#' starts a comment.
std::vector<int> parse_region_selection(const std::string& text);
std::vector<int> load_region_selection(const std::filesystem::path& path);

/// Number of edge-connected components (isolated vertices count as their own).
int count_components(const SurfaceMesh& mesh);
/// Throws when an edge is shared by more than two faces or traversed twice in
/// the same direction.
void check_orientation(const SurfaceMesh& mesh);

double mean_edge_length(const SurfaceMesh& mesh);
Vec3 face_normal(const SurfaceMesh& mesh, int face);

}  // namespace ossireg
