#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ossireg/mesh.hpp"

namespace ossireg {

/// Pinhole camera. focal is a single pixel-scaled scalar, so
/// u = focal * x / z + cx and v = focal * y / z + cy.
struct CameraModel {
  double focal = 50000.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Principal point at the image center.
  static CameraModel centered(int width, int height, double focal = 50000.0);
  /// Throws kInvalidInput on focal <= 0, empty image or principal point outside it.
  void validate() const;
};

/// Rigid transform from mesh coordinates (mm) to camera coordinates. The
/// camera looks along +z, image v grows with +y.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  /// (this * other)(p) = this(other(p)).
  Pose operator*(const Pose& other) const;
  /// Throws unless the rotation is orthonormal with det +1 within 1e-9.
  void validate() const;
};

/// Throws kDegenerate when the point is at or behind the camera plane.
Eigen::Vector2d project(const CameraModel& camera, const Pose& pose, const Vec3& point);

/// Rotation from an axis-angle vector (angle in radians = norm).
Eigen::Matrix3d rotation_from_vector(const Vec3& w);
Vec3 rotation_to_vector(const Eigen::Matrix3d& r);
/// Closest rotation in the Frobenius sense.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

/// Pose file contents. revision is bumped by every save through the service.
struct PoseRecord {
  Pose pose;
  CameraModel camera;
  std::int64_t revision = 0;
};

/// JSON: {"format": "ossireg.pose", "version": 1, "rotation": [9, row-major],
/// "translation": [3], "camera": {"focal", "cx", "cy", "width", "height"},
/// "revision"}. revision is optional on input.
std::string format_pose(const PoseRecord& record);
PoseRecord parse_pose(const std::string& text);
void write_pose(const std::filesystem::path& path, const PoseRecord& record);
PoseRecord load_pose(const std::filesystem::path& path);

}  // namespace ossireg
