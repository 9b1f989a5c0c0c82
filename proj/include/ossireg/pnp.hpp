#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ossireg/camera.hpp"
#include "ossireg/correspondence.hpp"

namespace ossireg {

struct PnPOptions {
  int max_iterations = 100;
  /// Stop when an accepted step lowers the RMS by less than this fraction.
  double tol = 1e-10;
  /// Also stop when a step changes the rotation by less than this (radians)
  /// and the translation by less than this fraction of its norm.
  double step_tol = 1e-12;
  double initial_damping = 1e-3;
  /// Smallest/largest covariance eigenvalue below which the planar
  /// initializer is used.
  double planar_ratio = 1e-4;
};

struct PnPResult {
  Pose pose;
  double rms = 0.0;          ///< pixels, over the points used
  double initial_rms = 0.0;  ///< after linear initialization
  int inliers = 0;
  double inlier_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
  bool planar_initialization = false;
  /// RMS after initialization and after every accepted step.
  std::vector<double> rms_history;
  /// Indices into the input set (RANSAC only; all used points otherwise).
  std::vector<int> inlier_indices;
};

/// Linear initializers. Throw kDegenerate on collinear or too-small sets.
Pose initialize_nonplanar(std::span<const Vec3> points, std::span<const Eigen::Vector2d> pixels,
                          const CameraModel& camera);
Pose initialize_planar(std::span<const Vec3> points, std::span<const Eigen::Vector2d> pixels,
                       const CameraModel& camera);

/// Pose after the 6-vector increment (rotation vector, translation):
/// R' = exp(w) R, t' = exp(w) t + dt. This is a left perturbation of the
/// whole transform, so camera-space points move by w x p + dt.
Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

/// Stacked residuals (projected - observed, u then v per point) and their
/// Jacobian with respect to the increment of apply_increment at zero.
/// Points behind the camera make the residual infinite.
void reprojection_residuals(const CameraModel& camera, const Pose& pose,
                            std::span<const Vec3> points,
                            std::span<const Eigen::Vector2d> pixels, Eigen::VectorXd& residuals,
                            Eigen::MatrixXd* jacobian = nullptr);
double reprojection_rms(const CameraModel& camera, const Pose& pose,
                        std::span<const Vec3> points, std::span<const Eigen::Vector2d> pixels);

/// Damped Gauss-Newton from a starting pose.
PnPResult refine_pose(const Pose& initial, std::span<const Vec3> points,
                      std::span<const Eigen::Vector2d> pixels, const CameraModel& camera,
                      const PnPOptions& options = {});

/// Linear initialization then refinement. Zero-weight correspondences are
/// dropped; other weights are ignored. Needs 4 points when planar, 6 otherwise.
PnPResult solve_pnp(const CorrespondenceSet& corr, const CameraModel& camera,
                    const PnPOptions& options = {});

struct RansacOptions {
  int iterations = 200;
  double inlier_threshold_px = 8.0;
  std::uint64_t seed = 0;
  int min_sample = 6;
  int min_inliers = 6;
  /// Early exit once this fraction of the points agrees with a hypothesis.
  double stop_ratio = 0.95;
  /// Iterations of refinement on each minimal sample.
  int sample_iterations = 10;
  PnPOptions refine;
};

/// Hypotheses from random minimal samples, scored by inlier count (ties by
/// lower inlier RMS); the winner is refined on its inliers. Deterministic for a
/// given seed. Throws kNoConsensus below min_inliers.
PnPResult solve_pnp_ransac(const CorrespondenceSet& corr, const CameraModel& camera,
                           const RansacOptions& options = {});

}  // namespace ossireg
