#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ossireg/mesh.hpp"
#include "ossireg/parameterization.hpp"
#include "ossireg/raster.hpp"

namespace ossireg {

struct Correspondence {
  Eigen::Vector2d pixel;  ///< image point, pixel centers at +0.5
  Vec3 point;             ///< surface point, mm
  double weight = 1.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  int width = 0;  ///< size of the source map
  int height = 0;

  size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

/// Uniform grid over (mu, nu) in [0,1]^2 for nearest-vertex queries.
class ParameterIndex {
 public:
  ParameterIndex() = default;
  ParameterIndex(std::span<const double> mu, std::span<const double> nu);

  /// Nearest point in Euclidean (mu, nu) distance; ties go to the lowest index.
  int nearest(double mu, double nu) const;
  int size() const { return static_cast<int>(mu_.size()); }

 private:
  int cell_of(double value) const;

  int cells_ = 1;
  std::vector<double> mu_;
  std::vector<double> nu_;
  std::vector<int> start_;  // CSR layout, cells_ * cells_ + 1 entries
  std::vector<int> items_;
};

/// Point location over the triangles of a mesh laid out in (mu, nu).
///
/// Triangles whose parameter-space image is folded or collapsed relative to
/// their surface area have no unique inverse; points that come within
/// ambiguity_radius of one are reported ambiguous.
class ParameterFaceIndex {
 public:
  ParameterFaceIndex() = default;
  ParameterFaceIndex(const SurfaceMesh& mesh, std::span<const double> mu,
                     std::span<const double> nu, double ambiguity_radius = 1.0 / 65535.0);

  enum class Status { kFound, kAmbiguous, kOutside };
  struct Hit {
    Status status = Status::kOutside;
    int face = -1;
    std::array<double, 3> barycentric{};
  };
  /// Lowest-numbered well-conditioned face containing the point.
  Hit locate(double mu, double nu) const;
  /// For points just outside the parameter domain: the closest point of the
  /// nearest well-conditioned face within max_distance. Ambiguous when an
  /// ill-conditioned face is at least as close.
  Hit closest(double mu, double nu, double max_distance) const;

  bool ill_conditioned(int face) const { return ill_[face] != 0; }
  int ill_conditioned_count() const;

 private:
  const SurfaceMesh* mesh_ = nullptr;
  std::vector<Eigen::Vector2d> uv_;
  std::vector<std::uint8_t> ill_;
  double radius_ = 0.0;
  int cells_ = 1;
  std::vector<int> start_;
  std::vector<int> items_;
};

enum class LookupMode {
  /// Containing parameter-space triangle, interpolated. Ambiguous pixels are
  /// dropped; pixels just outside the domain snap to the closest triangle,
  /// farther ones fall back to the nearest vertex.
  kInterpolate,
  kNearestVertex,
};

/// Index over the cut surface of a parameterization, so that seam copies are
/// reachable with nu = 0 and nu = 1.
ParameterIndex build_parameter_index(const SurfaceParameterization& param);

/// Both lookups for one parameterization. Holds a pointer to param.cut.mesh,
/// so the parameterization must outlive it.
struct CorrespondenceIndex {
  ParameterIndex vertices;
  ParameterFaceIndex faces;
};
CorrespondenceIndex build_correspondence_index(const SurfaceParameterization& param);

/// One correspondence per valid pixel: the pixel center paired with the
/// surface point found for its (mu, nu).
CorrespondenceSet extract_correspondences(const CoordinateMap& map,
                                          const SurfaceParameterization& param,
                                          const CorrespondenceIndex& index,
                                          LookupMode mode = LookupMode::kInterpolate);
CorrespondenceSet extract_correspondences(const CoordinateMap& map,
                                          const SurfaceParameterization& param,
                                          LookupMode mode = LookupMode::kInterpolate);

/// Text table: header "ossireg-correspondences 1 <width> <height> <count>",
/// then one "u v x y z w" row per correspondence.
std::string format_correspondences(const CorrespondenceSet& set);
CorrespondenceSet parse_correspondences(const std::string& text);

}  // namespace ossireg
