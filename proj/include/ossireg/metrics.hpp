#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ossireg/camera.hpp"
#include "ossireg/raster.hpp"

namespace ossireg {

/// Angular distance arccos((trace(R1^T R2) - 1) / 2) in degrees. Both inputs
/// must be rotations within the Pose tolerance.
double rotation_error(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2);

struct TranslationError {
  double ex_mm = 0.0;
  double ey_mm = 0.0;
  /// 100 * |dz| / focal.
  double ez_pct = 0.0;
};
TranslationError translation_error(const Vec3& t1, const Vec3& t2, const CameraModel& camera);

struct PoseErrorReport {
  std::string sample_id;
  double rot_deg = 0.0;
  double ex_mm = 0.0;
  double ey_mm = 0.0;
  double ez_pct = 0.0;
};
PoseErrorReport compare_poses(const std::string& sample_id, const Pose& estimate,
                              const Pose& truth, const CameraModel& camera);

/// Single-channel image of doubles, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int width, int height, double fill = 0.0);
  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
};

/// Binary cross-entropy of prediction against target, prediction clamped to
/// [eps, 1 - eps]. Both must hold values in [0, 1].
double bce(const Plane& target, const Plane& prediction, double eps = 1e-7);
double mse(const Plane& a, const Plane& b);

struct SsimOptions {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  double c3 = 0.03 * 0.03 / 2.0;
  int window = 7;  ///< side of the uniform square window
};

/// Mean of l^alpha * c^beta * s^gamma over every fully contained window
/// (population statistics within each window).
double ssim(const Plane& a, const Plane& b, const SsimOptions& options = {});

/// (bce + mse + (1 - ssim)) / 3.
double combined_loss(const Plane& target, const Plane& prediction,
                     const SsimOptions& options = {});

struct MapLosses {
  double bce = 0.0;
  double mse = 0.0;
  double ssim = 0.0;
  double combined = 0.0;
};

/// mu and nu planes of a coordinate map; invalid pixels carry 0.
std::vector<Plane> map_planes(const CoordinateMap& map);

/// Losses between two coordinate maps over the mu and nu planes. bce and mse
/// average over pixels valid in either map (all pixels if none are); ssim
/// averages the two per-plane values over the full image.
MapLosses compare_maps(const CoordinateMap& target, const CoordinateMap& prediction,
                       const SsimOptions& options = {});

/// Box-plot summary. Quartiles interpolate linearly between order statistics:
/// q(p) = x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)]),
/// h = (n - 1) p over the sorted values.
struct ErrorSummary {
  std::string metric;
  int count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

double quantile(std::span<const double> sorted, double p);
ErrorSummary summarize_values(const std::string& metric, std::span<const double> values);
/// One summary each for rot_deg, ex_mm, ey_mm, ez_pct. Throws on an empty list.
std::vector<ErrorSummary> summarize(std::span<const PoseErrorReport> reports);

/// `sample_id,rot_deg,ex_mm,ey_mm,ez_pct` with a header row.
std::string format_error_csv(std::span<const PoseErrorReport> reports);
std::vector<PoseErrorReport> parse_error_csv(const std::string& text);
/// `metric,count,min,q1,median,q3,max,mean` with a header row.
std::string format_summary_csv(std::span<const ErrorSummary> summaries);

}  // namespace ossireg
