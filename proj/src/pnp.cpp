#include "ossireg/pnp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Geometry>

#include "ossireg/error.hpp"

namespace ossireg {
namespace {

using Vec2 = Eigen::Vector2d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 normalized(const CameraModel& camera, const Vec2& pixel) {
  return {(pixel.x() - camera.cx) / camera.focal, (pixel.y() - camera.cy) / camera.focal};
}

struct Spread {
  Vec3 centroid;
  Eigen::Vector3d eigenvalues;  // ascending
  Eigen::Matrix3d axes;         // matching columns
};

Spread spread_of(std::span<const Vec3> points) {
  Spread s;
  s.centroid = Vec3::Zero();
  for (const auto& p : points) s.centroid += p;
  s.centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - s.centroid) * (p - s.centroid).transpose();
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  s.eigenvalues = eig.eigenvalues().cwiseMax(0.0);
  s.axes = eig.eigenvectors();
  return s;
}

void check_inputs(std::span<const Vec3> points, std::span<const Vec2> pixels, size_t minimum,
                  const char* who) {
  if (points.size() != pixels.size()) {
    throw Error(ErrorCode::kInvalidInput, std::string(who) + ": point/pixel count mismatch");
  }
  if (points.size() < minimum) {
    throw Error(ErrorCode::kDegenerate, std::string(who) + ": need at least " +
                                            std::to_string(minimum) + " points, got " +
                                            std::to_string(points.size()));
  }
}

void check_not_collinear(const Spread& s, const char* who) {
  if (!(s.eigenvalues(2) > 0.0) || s.eigenvalues(1) <= 1e-12 * s.eigenvalues(2)) {
    throw Error(ErrorCode::kDegenerate,
                std::string(who) + ": points are collinear or coincident");
  }
}

double mean_squared_error(const CameraModel& camera, const Pose& pose,
                          std::span<const Vec3> points, std::span<const Vec2> pixels) {
  double sum = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 p = pose.apply(points[i]);
    if (!(p.z() > 0.0)) return kInf;
    const Vec2 uv(camera.focal * p.x() / p.z() + camera.cx,
                  camera.focal * p.y() / p.z() + camera.cy);
    sum += (uv - pixels[i]).squaredNorm();
  }
  return sum / static_cast<double>(points.size());
}

// Rigid fit camera = R * world + t (no scale).
Pose fit_rigid(std::span<const Vec3> world, const std::vector<Vec3>& camera) {
  Eigen::Matrix3Xd src(3, world.size()), dst(3, world.size());
  for (size_t i = 0; i < world.size(); ++i) {
    src.col(i) = world[i];
    dst.col(i) = camera[i];
  }
  const Eigen::Matrix4d m = Eigen::umeyama(src, dst, false);
  Pose pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.translation = m.topRightCorner<3, 1>();
  return pose;
}

// Column order of the squared-distance system over the null-space weights.
constexpr std::array<std::array<int, 2>, 10> kBetaPairs = {{
    {0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 2}, {0, 3}, {1, 3}, {2, 3}, {3, 3}}};

Eigen::Matrix<double, 10, 1> beta_products(const Eigen::Vector4d& beta) {
  Eigen::Matrix<double, 10, 1> out;
  for (int c = 0; c < 10; ++c) out(c) = beta(kBetaPairs[c][0]) * beta(kBetaPairs[c][1]);
  return out;
}

void refine_betas(const Eigen::Matrix<double, 6, 10>& l, const Eigen::Matrix<double, 6, 1>& rho,
                  Eigen::Vector4d& beta) {
  for (int iter = 0; iter < 5; ++iter) {
    Eigen::Matrix<double, 6, 4> jac = Eigen::Matrix<double, 6, 4>::Zero();
    for (int c = 0; c < 10; ++c) {
      const int a = kBetaPairs[c][0], b = kBetaPairs[c][1];
      jac.col(a) += l.col(c) * beta(b);
      jac.col(b) += l.col(c) * beta(a);
    }
    const Eigen::Matrix<double, 6, 1> err = rho - l * beta_products(beta);
    const Eigen::Vector4d step = jac.colPivHouseholderQr().solve(err);
    if (!step.allFinite()) break;
    beta += step;
  }
}

}  // namespace

Pose initialize_nonplanar(std::span<const Vec3> points, std::span<const Vec2> pixels,
                          const CameraModel& camera) {
  check_inputs(points, pixels, 6, "initialize_nonplanar");
  const Spread s = spread_of(points);
  check_not_collinear(s, "initialize_nonplanar");
  if (s.eigenvalues(0) <= 1e-12 * s.eigenvalues(2)) {
    throw Error(ErrorCode::kDegenerate, "initialize_nonplanar: points are coplanar");
  }

  // Control points: centroid plus one per principal axis.
  std::array<Vec3, 4> control;
  control[0] = s.centroid;
  for (int k = 0; k < 3; ++k) control[k + 1] = s.centroid + std::sqrt(s.eigenvalues(k)) * s.axes.col(k);
  Eigen::Matrix3d basis;
  for (int k = 0; k < 3; ++k) basis.col(k) = control[k + 1] - control[0];
  const Eigen::Matrix3d basis_inv = basis.inverse();

  std::vector<Eigen::Vector4d> alphas(points.size());
  Eigen::Matrix<double, 12, 12> mtm = Eigen::Matrix<double, 12, 12>::Zero();
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 a = basis_inv * (points[i] - control[0]);
    alphas[i] << 1.0 - a.sum(), a.x(), a.y(), a.z();
    const Vec2 x = normalized(camera, pixels[i]);
    Eigen::Matrix<double, 2, 12> rows = Eigen::Matrix<double, 2, 12>::Zero();
    for (int j = 0; j < 4; ++j) {
      rows(0, 3 * j) = alphas[i](j);
      rows(0, 3 * j + 2) = -alphas[i](j) * x.x();
      rows(1, 3 * j + 1) = alphas[i](j);
      rows(1, 3 * j + 2) = -alphas[i](j) * x.y();
    }
    mtm.noalias() += rows.transpose() * rows;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(mtm);
  const Eigen::Matrix<double, 12, 4> null = eig.eigenvectors().leftCols<4>();

  Eigen::Matrix<double, 6, 10> l;
  Eigen::Matrix<double, 6, 1> rho;
  int row = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b, ++row) {
      std::array<Vec3, 4> dv;
      for (int k = 0; k < 4; ++k) {
        dv[k] = null.col(k).segment<3>(3 * a) - null.col(k).segment<3>(3 * b);
      }
      for (int c = 0; c < 10; ++c) {
        const int p = kBetaPairs[c][0], q = kBetaPairs[c][1];
        l(row, c) = (p == q ? 1.0 : 2.0) * dv[p].dot(dv[q]);
      }
      rho(row) = (control[a] - control[b]).squaredNorm();
    }
  }

  // Three closed-form guesses of the null-space weights, each polished.
  std::vector<Eigen::Vector4d> guesses;
  {
    Eigen::Matrix<double, 6, 4> sub;
    sub << l.col(0), l.col(1), l.col(3), l.col(6);
    const Eigen::Vector4d b = sub.colPivHouseholderQr().solve(rho);
    Eigen::Vector4d beta = Eigen::Vector4d::Zero();
    const double b0 = std::sqrt(std::abs(b(0)));
    if (b0 > 0.0) {
      const double sign = b(0) < 0.0 ? -1.0 : 1.0;
      beta << b0, sign * b(1) / b0, sign * b(2) / b0, sign * b(3) / b0;
      guesses.push_back(beta);
    }
  }
  {
    Eigen::Matrix<double, 6, 3> sub;
    sub << l.col(0), l.col(1), l.col(2);
    const Eigen::Vector3d b = sub.colPivHouseholderQr().solve(rho);
    Eigen::Vector4d beta = Eigen::Vector4d::Zero();
    beta(0) = std::sqrt(std::abs(b(0)));
    beta(1) = std::sqrt(std::abs(b(2)));
    if ((b(1) < 0.0) != (b(0) < 0.0)) beta(0) = -beta(0);
    if (beta(0) != 0.0) guesses.push_back(beta);
  }
  {
    Eigen::Matrix<double, 6, 5> sub;
    sub << l.col(0), l.col(1), l.col(2), l.col(3), l.col(4);
    const Eigen::Matrix<double, 5, 1> b = sub.colPivHouseholderQr().solve(rho);
    Eigen::Vector4d beta = Eigen::Vector4d::Zero();
    beta(0) = std::sqrt(std::abs(b(0)));
    beta(1) = std::sqrt(std::abs(b(2)));
    if ((b(1) < 0.0) != (b(0) < 0.0)) beta(0) = -beta(0);
    if (beta(0) != 0.0) {
      beta(2) = b(3) / beta(0);
      guesses.push_back(beta);
    }
  }

  Pose best;
  double best_error = kInf;
  for (Eigen::Vector4d beta : guesses) {
    refine_betas(l, rho, beta);
    std::array<Vec3, 4> control_camera;
    for (int j = 0; j < 4; ++j) {
      control_camera[j] = Vec3::Zero();
      for (int k = 0; k < 4; ++k) control_camera[j] += beta(k) * null.col(k).segment<3>(3 * j);
    }
    std::vector<Vec3> camera_points(points.size());
    double mean_z = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      camera_points[i] = Vec3::Zero();
      for (int j = 0; j < 4; ++j) camera_points[i] += alphas[i](j) * control_camera[j];
      mean_z += camera_points[i].z();
    }
    if (mean_z < 0.0) {
      for (auto& p : camera_points) p = -p;
    }
    if (!std::all_of(camera_points.begin(), camera_points.end(),
                     [](const Vec3& p) { return p.allFinite(); })) {
      continue;
    }
    const Pose pose = fit_rigid(points, camera_points);
    const double error = mean_squared_error(camera, pose, points, pixels);
    if (error < best_error) {
      best_error = error;
      best = pose;
    }
  }
  if (!std::isfinite(best_error)) {
    throw Error(ErrorCode::kNumerical, "initialize_nonplanar: no valid solution");
  }
  return best;
}

Pose initialize_planar(std::span<const Vec3> points, std::span<const Vec2> pixels,
                       const CameraModel& camera) {
  check_inputs(points, pixels, 4, "initialize_planar");
  const Spread s = spread_of(points);
  check_not_collinear(s, "initialize_planar");

  // Plane frame: two largest axes, normal completing a right-handed basis.
  Eigen::Matrix3d frame;
  frame.col(0) = s.axes.col(2);
  frame.col(1) = s.axes.col(1);
  frame.col(2) = frame.col(0).cross(frame.col(1));

  const size_t n = points.size();
  std::vector<Vec2> plane(n), image(n);
  Vec2 plane_mean = Vec2::Zero(), image_mean = Vec2::Zero();
  for (size_t i = 0; i < n; ++i) {
    plane[i] = (frame.transpose() * (points[i] - s.centroid)).head<2>();
    image[i] = normalized(camera, pixels[i]);
    plane_mean += plane[i];
    image_mean += image[i];
  }
  plane_mean /= static_cast<double>(n);
  image_mean /= static_cast<double>(n);
  double plane_scale = 0.0, image_scale = 0.0;
  for (size_t i = 0; i < n; ++i) {
    plane_scale += (plane[i] - plane_mean).norm();
    image_scale += (image[i] - image_mean).norm();
  }
  plane_scale = std::sqrt(2.0) * n / plane_scale;
  image_scale = std::sqrt(2.0) * n / image_scale;
  if (!std::isfinite(plane_scale) || !std::isfinite(image_scale)) {
    throw Error(ErrorCode::kDegenerate, "initialize_planar: coincident image points");
  }

  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 p = (plane[i] - plane_mean) * plane_scale;
    const Vec2 q = (image[i] - image_mean) * image_scale;
    Eigen::Matrix<double, 2, 9> rows;
    rows << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, q.x() * p.x(), q.x() * p.y(), q.x(),
        0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, q.y() * p.x(), q.y() * p.y(), q.y();
    ata.noalias() += rows.transpose() * rows;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const Eigen::Matrix<double, 9, 1> h = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  Eigen::Matrix3d to_plane, to_image_inv;
  to_plane << plane_scale, 0.0, -plane_scale * plane_mean.x(), 0.0, plane_scale,
      -plane_scale * plane_mean.y(), 0.0, 0.0, 1.0;
  to_image_inv << 1.0 / image_scale, 0.0, image_mean.x(), 0.0, 1.0 / image_scale,
      image_mean.y(), 0.0, 0.0, 1.0;
  const Eigen::Matrix3d hom = to_image_inv * hn * to_plane;

  double lambda = 2.0 / (hom.col(0).norm() + hom.col(1).norm());
  if (hom(2, 2) * lambda < 0.0) lambda = -lambda;
  const Vec3 r1 = lambda * hom.col(0);
  const Vec3 r2 = lambda * hom.col(1);
  Eigen::Matrix3d local;
  local << r1, r2, r1.cross(r2);
  local = orthonormalize(local);
  const Vec3 t_local = lambda * hom.col(2);

  Pose pose;
  pose.rotation = local * frame.transpose();
  pose.translation = t_local - pose.rotation * s.centroid;
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
    throw Error(ErrorCode::kNumerical, "initialize_planar: homography decomposition failed");
  }
  return pose;
}

Pose apply_increment(const Pose& pose, const Vec6& delta) {
  const Eigen::Matrix3d step = rotation_from_vector(delta.head<3>());
  Pose out;
  out.rotation = step * pose.rotation;
  out.translation = step * pose.translation + delta.tail<3>();
  return out;
}

void reprojection_residuals(const CameraModel& camera, const Pose& pose,
                            std::span<const Vec3> points, std::span<const Vec2> pixels,
                            Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian) {
  check_inputs(points, pixels, 0, "reprojection_residuals");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  residuals.resize(2 * n);
  if (jacobian) jacobian->resize(2 * n, 6);
  const double f = camera.focal;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = pose.apply(points[i]);
    if (!(p.z() > 0.0)) {
      residuals.segment<2>(2 * i).setConstant(kInf);
      if (jacobian) jacobian->middleRows<2>(2 * i).setZero();
      continue;
    }
    const double iz = 1.0 / p.z();
    residuals(2 * i) = f * p.x() * iz + camera.cx - pixels[i].x();
    residuals(2 * i + 1) = f * p.y() * iz + camera.cy - pixels[i].y();
    if (!jacobian) continue;
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << f * iz, 0.0, -f * p.x() * iz * iz, 0.0, f * iz, -f * p.y() * iz * iz;
    Eigen::Matrix3d skew;
    skew << 0.0, -p.z(), p.y(), p.z(), 0.0, -p.x(), -p.y(), p.x(), 0.0;
    // d(camera point) / d(rotation increment) = -[p]x, / d(translation) = I.
    jacobian->block<2, 3>(2 * i, 0) = -dproj * skew;
    jacobian->block<2, 3>(2 * i, 3) = dproj;
  }
}

double reprojection_rms(const CameraModel& camera, const Pose& pose,
                        std::span<const Vec3> points, std::span<const Vec2> pixels) {
  check_inputs(points, pixels, 1, "reprojection_rms");
  return std::sqrt(mean_squared_error(camera, pose, points, pixels));
}

namespace {

// Accumulates J^T J and J^T r without storing J. Returns the squared error sum.
double normal_equations(const CameraModel& camera, const Pose& pose,
                        std::span<const Vec3> points, std::span<const Vec2> pixels, Mat6& jtj,
                        Vec6& jtr) {
  jtj.setZero();
  jtr.setZero();
  double cost = 0.0;
  const double f = camera.focal;
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 p = pose.apply(points[i]);
    if (!(p.z() > 0.0)) return kInf;
    const double iz = 1.0 / p.z();
    const Vec2 r(f * p.x() * iz + camera.cx - pixels[i].x(),
                 f * p.y() * iz + camera.cy - pixels[i].y());
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << f * iz, 0.0, -f * p.x() * iz * iz, 0.0, f * iz, -f * p.y() * iz * iz;
    Eigen::Matrix3d skew;
    skew << 0.0, -p.z(), p.y(), p.z(), 0.0, -p.x(), -p.y(), p.x(), 0.0;
    Eigen::Matrix<double, 2, 6> j;
    j.leftCols<3>() = -dproj * skew;
    j.rightCols<3>() = dproj;
    jtj.noalias() += j.transpose() * j;
    jtr.noalias() += j.transpose() * r;
    cost += r.squaredNorm();
  }
  return cost;
}

}  // namespace

PnPResult refine_pose(const Pose& initial, std::span<const Vec3> points,
                      std::span<const Vec2> pixels, const CameraModel& camera,
                      const PnPOptions& options) {
  check_inputs(points, pixels, 1, "refine_pose");
  const double n = static_cast<double>(points.size());
  PnPResult result;
  Pose pose = initial;
  Mat6 jtj;
  Vec6 jtr;
  double cost = normal_equations(camera, pose, points, pixels, jtj, jtr);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kNumerical, "refine_pose: initial pose puts points behind the camera");
  }
  result.initial_rms = std::sqrt(cost / n);
  result.rms_history.push_back(result.initial_rms);
  double lambda = options.initial_damping;

  for (int iter = 1; iter <= options.max_iterations && cost > 0.0; ++iter) {
    result.iterations = iter;
    Mat6 damped = jtj;
    for (int k = 0; k < 6; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
    const Vec6 delta = damped.ldlt().solve(-jtr);
    const Pose candidate = apply_increment(pose, delta);
    Mat6 cand_jtj;
    Vec6 cand_jtr;
    const double cand_cost = delta.allFinite()
                                 ? normal_equations(camera, candidate, points, pixels,
                                                    cand_jtj, cand_jtr)
                                 : kInf;
    if (cand_cost < cost) {
      const double rms = std::sqrt(cost / n);
      const double cand_rms = std::sqrt(cand_cost / n);
      pose = candidate;
      cost = cand_cost;
      jtj = cand_jtj;
      jtr = cand_jtr;
      result.rms_history.push_back(cand_rms);
      lambda = std::max(lambda / 10.0, 1e-15);
      if ((rms - cand_rms) / rms < options.tol) {
        result.converged = true;
        break;
      }
    } else if (delta.head<3>().norm() <= options.step_tol &&
               delta.tail<3>().norm() <=
                   options.step_tol * (pose.translation.norm() + options.step_tol)) {
      // Rounding noise: the error cannot be lowered further.
      result.converged = true;
      break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        // No step lowers the error any more.
        result.converged = true;
        break;
      }
    }
  }
  if (cost == 0.0) result.converged = true;

  pose.rotation = orthonormalize(pose.rotation);
  result.pose = pose;
  result.rms = reprojection_rms(camera, pose, points, pixels);
  result.inliers = static_cast<int>(points.size());
  result.inlier_ratio = 1.0;
  return result;
}

namespace {

struct Usable {
  std::vector<Vec3> points;
  std::vector<Vec2> pixels;
  std::vector<int> source;  // index into the correspondence set
};

Usable usable_points(const CorrespondenceSet& corr) {
  Usable u;
  for (size_t i = 0; i < corr.items.size(); ++i) {
    const auto& c = corr.items[i];
    if (!(c.weight > 0.0)) continue;
    u.points.push_back(c.point);
    u.pixels.push_back(c.pixel);
    u.source.push_back(static_cast<int>(i));
  }
  return u;
}

bool is_planar(std::span<const Vec3> points, double ratio) {
  const Spread s = spread_of(points);
  return s.eigenvalues(0) < ratio * s.eigenvalues(2);
}

PnPResult solve_points(std::span<const Vec3> points, std::span<const Vec2> pixels,
                       const CameraModel& camera, const PnPOptions& options) {
  if (points.size() < 4) {
    throw Error(ErrorCode::kDegenerate,
                "solve_pnp: need at least 4 correspondences, got " + std::to_string(points.size()));
  }
  check_not_collinear(spread_of(points), "solve_pnp");
  const bool planar = is_planar(points, options.planar_ratio);
  if (!planar && points.size() < 6) {
    throw Error(ErrorCode::kDegenerate,
                "solve_pnp: non-planar configuration needs at least 6 correspondences");
  }
  const Pose initial = planar ? initialize_planar(points, pixels, camera)
                              : initialize_nonplanar(points, pixels, camera);
  PnPResult result = refine_pose(initial, points, pixels, camera, options);
  result.planar_initialization = planar;
  return result;
}

}  // namespace

PnPResult solve_pnp(const CorrespondenceSet& corr, const CameraModel& camera,
                    const PnPOptions& options) {
  camera.validate();
  const Usable u = usable_points(corr);
  PnPResult result = solve_points(u.points, u.pixels, camera, options);
  result.inlier_indices = u.source;
  return result;
}

PnPResult solve_pnp_ransac(const CorrespondenceSet& corr, const CameraModel& camera,
                           const RansacOptions& options) {
  camera.validate();
  const Usable u = usable_points(corr);
  const int n = static_cast<int>(u.points.size());
  if (options.min_sample < 4) {
    throw Error(ErrorCode::kInvalidInput, "ransac: min_sample must be at least 4");
  }
  if (n < options.min_sample) {
    throw Error(ErrorCode::kDegenerate, "ransac: need at least " +
                                            std::to_string(options.min_sample) +
                                            " correspondences, got " + std::to_string(n));
  }
  const double threshold2 = options.inlier_threshold_px * options.inlier_threshold_px;
  const auto inliers_of = [&](const Pose& pose, double* rms) {
    std::vector<int> in;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 p = pose.apply(u.points[i]);
      if (!(p.z() > 0.0)) continue;
      const Vec2 uv(camera.focal * p.x() / p.z() + camera.cx,
                    camera.focal * p.y() / p.z() + camera.cy);
      const double d2 = (uv - u.pixels[i]).squaredNorm();
      if (d2 < threshold2) {
        in.push_back(i);
        sum += d2;
      }
    }
    if (rms) *rms = in.empty() ? kInf : std::sqrt(sum / in.size());
    return in;
  };

  std::mt19937_64 rng(options.seed);
  PnPOptions sample_options = options.refine;
  sample_options.max_iterations = options.sample_iterations;
  Pose best_pose;
  std::vector<int> best_inliers;
  double best_rms = kInf;
  std::vector<Vec3> sample_points(options.min_sample);
  std::vector<Vec2> sample_pixels(options.min_sample);
  std::vector<int> picked;
  for (int it = 0; it < options.iterations; ++it) {
    picked.clear();
    while (static_cast<int>(picked.size()) < options.min_sample) {
      const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (std::find(picked.begin(), picked.end(), k) == picked.end()) picked.push_back(k);
    }
    for (int k = 0; k < options.min_sample; ++k) {
      sample_points[k] = u.points[picked[k]];
      sample_pixels[k] = u.pixels[picked[k]];
    }
    Pose hypothesis;
    try {
      hypothesis = solve_points(sample_points, sample_pixels, camera, sample_options).pose;
    } catch (const Error&) {
      continue;
    }
    double rms = kInf;
    std::vector<int> in = inliers_of(hypothesis, &rms);
    if (in.size() > best_inliers.size() || (in.size() == best_inliers.size() && rms < best_rms)) {
      best_inliers = std::move(in);
      best_rms = rms;
      best_pose = hypothesis;
    }
    if (best_inliers.size() >= options.stop_ratio * n) break;
  }
  const int required = std::max({options.min_inliers, options.min_sample, 4});
  if (static_cast<int>(best_inliers.size()) < required) {
    throw Error(ErrorCode::kNoConsensus,
                "ransac: best hypothesis has " + std::to_string(best_inliers.size()) +
                    " inliers, need " + std::to_string(required));
  }

  // Re-solve on the consensus set, both from scratch and from the hypothesis,
  // and keep the better fit.
  const auto refit = [&](const std::vector<int>& in, const Pose& start) {
    std::vector<Vec3> pts;
    std::vector<Vec2> pix;
    for (int i : in) {
      pts.push_back(u.points[i]);
      pix.push_back(u.pixels[i]);
    }
    PnPResult from_start = refine_pose(start, pts, pix, camera, options.refine);
    try {
      PnPResult fresh = solve_points(pts, pix, camera, options.refine);
      if (fresh.rms <= from_start.rms) return fresh;
    } catch (const Error&) {
    }
    return from_start;
  };
  PnPResult result = refit(best_inliers, best_pose);
  std::vector<int> final_inliers = inliers_of(result.pose, nullptr);
  if (final_inliers != best_inliers && static_cast<int>(final_inliers.size()) >= required) {
    result = refit(final_inliers, result.pose);
    final_inliers = inliers_of(result.pose, nullptr);
  }
  if (static_cast<int>(final_inliers.size()) < required) {
    throw Error(ErrorCode::kNoConsensus, "ransac: consensus lost after refinement");
  }
  result.inliers = static_cast<int>(final_inliers.size());
  result.inlier_ratio = static_cast<double>(final_inliers.size()) / n;
  result.inlier_indices.clear();
  for (int i : final_inliers) result.inlier_indices.push_back(u.source[i]);
  return result;
}

}  // namespace ossireg
