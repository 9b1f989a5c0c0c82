#include "ossireg/camera.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"

namespace ossireg {

using json = nlohmann::json;

CameraModel CameraModel::centered(int width, int height, double focal) {
  CameraModel camera;
  camera.focal = focal;
  camera.width = width;
  camera.height = height;
  camera.cx = width / 2.0;
  camera.cy = height / 2.0;
  return camera;
}

void CameraModel::validate() const {
  if (!(focal > 0.0) || !std::isfinite(focal)) {
    throw Error(ErrorCode::kInvalidInput, "camera: focal must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidInput, "camera: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidInput, "camera: principal point outside the image");
  }
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

void Pose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "pose: non-finite values");
  }
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidInput, "pose: rotation is not a proper rotation");
  }
}

Eigen::Vector2d project(const CameraModel& camera, const Pose& pose, const Vec3& point) {
  const Vec3 p = pose.apply(point);
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::kDegenerate, "project: point is behind the camera");
  }
  return {camera.focal * p.x() / p.z() + camera.cx, camera.focal * p.y() / p.z() + camera.cy};
}

Eigen::Matrix3d rotation_from_vector(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Vec3 rotation_to_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

// ---------------------------------------------------------------------------
// Pose files

namespace {

double number_at(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::kFormat, std::string("pose: missing number '") + key + "'");
  }
  return j.at(key).get<double>();
}

std::vector<double> numbers_at(const json& j, const char* key, size_t n) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != n) {
    throw Error(ErrorCode::kFormat, std::string("pose: '") + key + "' must be an array of " +
                                        std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) {
      throw Error(ErrorCode::kFormat, std::string("pose: non-number in '") + key + "'");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string format_pose(const PoseRecord& record) {
  json j;
  j["format"] = "ossireg.pose";
  j["version"] = 1;
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation.push_back(record.pose.rotation(r, c));
  }
  j["rotation"] = rotation;
  j["translation"] = {record.pose.translation.x(), record.pose.translation.y(),
                      record.pose.translation.z()};
  j["camera"] = {{"focal", record.camera.focal},
                 {"cx", record.camera.cx},
                 {"cy", record.camera.cy},
                 {"width", record.camera.width},
                 {"height", record.camera.height}};
  j["revision"] = record.revision;
  return j.dump(2) + "\n";
}

PoseRecord parse_pose(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("pose: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "ossireg.pose") {
    throw Error(ErrorCode::kFormat, "pose: not an ossireg.pose record");
  }
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != 1) {
    throw Error(ErrorCode::kFormat, "pose: unsupported version");
  }
  PoseRecord record;
  const auto r = numbers_at(j, "rotation", 9);
  for (int i = 0; i < 9; ++i) record.pose.rotation(i / 3, i % 3) = r[i];
  const auto t = numbers_at(j, "translation", 3);
  record.pose.translation = Vec3(t[0], t[1], t[2]);
  record.pose.validate();

  if (!j.contains("camera") || !j.at("camera").is_object()) {
    throw Error(ErrorCode::kFormat, "pose: missing camera record");
  }
  const json& cam = j.at("camera");
  record.camera.focal = number_at(cam, "focal");
  record.camera.cx = number_at(cam, "cx");
  record.camera.cy = number_at(cam, "cy");
  if (!cam.contains("width") || !cam.at("width").is_number_integer() ||
      !cam.contains("height") || !cam.at("height").is_number_integer()) {
    throw Error(ErrorCode::kFormat, "pose: camera width/height must be integers");
  }
  record.camera.width = cam.at("width").get<int>();
  record.camera.height = cam.at("height").get<int>();
  record.camera.validate();

  if (j.contains("revision")) {
    if (!j.at("revision").is_number_integer()) {
      throw Error(ErrorCode::kFormat, "pose: revision must be an integer");
    }
    record.revision = j.at("revision").get<std::int64_t>();
  }
  return record;
}

void write_pose(const std::filesystem::path& path, const PoseRecord& record) {
  write_file(path, format_pose(record));
}

PoseRecord load_pose(const std::filesystem::path& path) {
  return parse_pose(read_file(path));
}

}  // namespace ossireg
