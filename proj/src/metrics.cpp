#include "ossireg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ossireg/error.hpp"

namespace ossireg {
namespace {

void check_rotation(const Eigen::Matrix3d& r, const char* name) {
  Pose p;
  p.rotation = r;
  try {
    p.validate();
  } catch (const Error&) {
    throw Error(ErrorCode::kInvalidInput, std::string("rotation_error: ") + name +
                                              " is not a rotation matrix");
  }
}

void check_same_size(const Plane& a, const Plane& b, const char* who) {
  if (a.width != b.width || a.height != b.height ||
      a.values.size() != static_cast<size_t>(a.width) * a.height ||
      b.values.size() != a.values.size()) {
    throw Error(ErrorCode::kInvalidInput, std::string(who) + ": dimension mismatch (" +
                                              std::to_string(a.width) + "x" +
                                              std::to_string(a.height) + " vs " +
                                              std::to_string(b.width) + "x" +
                                              std::to_string(b.height) + ")");
  }
}

double bce_term(double target, double prediction, double eps) {
  const double p = std::clamp(prediction, eps, 1.0 - eps);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

double rotation_error(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2) {
  check_rotation(r1, "R1");
  check_rotation(r2, "R2");
  // atan2 keeps small angles accurate where acos of the trace would not.
  const Eigen::Matrix3d m = r1.transpose() * r2;
  const Vec3 axis(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (m.trace() - 1.0)) * 180.0 / M_PI;
}

TranslationError translation_error(const Vec3& t1, const Vec3& t2, const CameraModel& camera) {
  if (!(camera.focal > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "translation_error: focal must be positive");
  }
  return {std::abs(t1.x() - t2.x()), std::abs(t1.y() - t2.y()),
          100.0 * std::abs(t1.z() - t2.z()) / camera.focal};
}

PoseErrorReport compare_poses(const std::string& sample_id, const Pose& estimate,
                              const Pose& truth, const CameraModel& camera) {
  const TranslationError t = translation_error(estimate.translation, truth.translation, camera);
  return {sample_id, rotation_error(estimate.rotation, truth.rotation), t.ex_mm, t.ey_mm,
          t.ez_pct};
}

Plane::Plane(int width, int height, double fill) : width(width), height(height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidInput, "plane: size must be positive");
  }
  values.assign(static_cast<size_t>(width) * height, fill);
}

double bce(const Plane& target, const Plane& prediction, double eps) {
  check_same_size(target, prediction, "bce");
  if (target.values.empty()) throw Error(ErrorCode::kInvalidInput, "bce: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < target.values.size(); ++i) {
    const double t = target.values[i], p = prediction.values[i];
    if (!(t >= 0.0 && t <= 1.0 && p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "bce: values must lie in [0, 1]");
    }
    sum += bce_term(t, p, eps);
  }
  return sum / static_cast<double>(target.values.size());
}

double mse(const Plane& a, const Plane& b) {
  check_same_size(a, b, "mse");
  if (a.values.empty()) throw Error(ErrorCode::kInvalidInput, "mse: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.values.size());
}

double ssim(const Plane& a, const Plane& b, const SsimOptions& options) {
  check_same_size(a, b, "ssim");
  if (!(options.c1 > 0.0 && options.c2 > 0.0 && options.c3 > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "ssim: stabilization constants must be positive");
  }
  const int w = options.window;
  if (w < 1 || w > a.width || w > a.height) {
    throw Error(ErrorCode::kInvalidInput, "ssim: window of " + std::to_string(w) +
                                              " does not fit a " + std::to_string(a.width) +
                                              "x" + std::to_string(a.height) + " image");
  }
  // Summed-area tables for the five window sums.
  const int sw = a.width + 1;
  std::vector<double> sa(static_cast<size_t>(sw) * (a.height + 1), 0.0), sb(sa), saa(sa),
      sbb(sa), sab(sa);
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      const double va = a.at(x, y), vb = b.at(x, y);
      const size_t i = static_cast<size_t>(y + 1) * sw + x + 1;
      const size_t up = i - sw, left = i - 1, diag = i - sw - 1;
      sa[i] = va + sa[up] + sa[left] - sa[diag];
      sb[i] = vb + sb[up] + sb[left] - sb[diag];
      saa[i] = va * va + saa[up] + saa[left] - saa[diag];
      sbb[i] = vb * vb + sbb[up] + sbb[left] - sbb[diag];
      sab[i] = va * vb + sab[up] + sab[left] - sab[diag];
    }
  }
  const auto box = [&](const std::vector<double>& s, int x, int y) {
    const size_t x1 = x + w, y1 = y + w;
    return s[y1 * sw + x1] - s[static_cast<size_t>(y) * sw + x1] - s[y1 * sw + x] +
           s[static_cast<size_t>(y) * sw + x];
  };
  const double n = static_cast<double>(w) * w;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + w <= a.height; ++y) {
    for (int x = 0; x + w <= a.width; ++x) {
      const double ma = box(sa, x, y) / n, mb = box(sb, x, y) / n;
      const double va = std::max(0.0, box(saa, x, y) / n - ma * ma);
      const double vb = std::max(0.0, box(sbb, x, y) / n - mb * mb);
      const double cov = box(sab, x, y) / n - ma * mb;
      const double sa_ = std::sqrt(va), sb_ = std::sqrt(vb);
      const double l = (2.0 * ma * mb + options.c1) / (ma * ma + mb * mb + options.c1);
      const double c = (2.0 * sa_ * sb_ + options.c2) / (va + vb + options.c2);
      const double s = (cov + options.c3) / (sa_ * sb_ + options.c3);
      total += std::pow(l, options.alpha) * std::pow(c, options.beta) * std::pow(s, options.gamma);
      ++count;
    }
  }
  return total / count;
}

double combined_loss(const Plane& target, const Plane& prediction, const SsimOptions& options) {
  return (bce(target, prediction) + mse(target, prediction) +
          (1.0 - ssim(target, prediction, options))) /
         3.0;
}

std::vector<Plane> map_planes(const CoordinateMap& map) {
  std::vector<Plane> planes(2, Plane(map.width, map.height));
  for (size_t i = 0; i < map.valid.size(); ++i) {
    if (!map.valid[i]) continue;
    planes[0].values[i] = map.mu[i];
    planes[1].values[i] = map.nu[i];
  }
  return planes;
}

MapLosses compare_maps(const CoordinateMap& target, const CoordinateMap& prediction,
                       const SsimOptions& options) {
  if (target.width != prediction.width || target.height != prediction.height) {
    throw Error(ErrorCode::kInvalidInput, "compare_maps: map sizes differ");
  }
  const auto pt = map_planes(target);
  const auto pp = map_planes(prediction);
  std::vector<size_t> used;
  for (size_t i = 0; i < target.valid.size(); ++i) {
    if (target.valid[i] || prediction.valid[i]) used.push_back(i);
  }
  if (used.empty()) {
    used.resize(target.valid.size());
    std::iota(used.begin(), used.end(), size_t{0});
  }
  MapLosses out;
  double bce_sum = 0.0, mse_sum = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (size_t i : used) {
      const double t = pt[c].values[i], p = pp[c].values[i];
      bce_sum += bce_term(t, p, 1e-7);
      mse_sum += (t - p) * (t - p);
    }
    out.ssim += ssim(pt[c], pp[c], options) / 2.0;
  }
  const double n = 2.0 * static_cast<double>(used.size());
  out.bce = bce_sum / n;
  out.mse = mse_sum / n;
  out.combined = (out.bce + out.mse + (1.0 - out.ssim)) / 3.0;
  return out;
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kInvalidInput, "quantile: no values");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ErrorSummary summarize_values(const std::string& metric, std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidInput, "summarize: no values for " + metric);
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  ErrorSummary s;
  s.metric = metric;
  s.count = static_cast<int>(sorted.size());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile(sorted, 0.25);
  s.median = quantile(sorted, 0.5);
  s.q3 = quantile(sorted, 0.75);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  return s;
}

std::vector<ErrorSummary> summarize(std::span<const PoseErrorReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidInput, "summarize: empty report list");
  std::vector<double> rot, ex, ey, ez;
  for (const auto& r : reports) {
    rot.push_back(r.rot_deg);
    ex.push_back(r.ex_mm);
    ey.push_back(r.ey_mm);
    ez.push_back(r.ez_pct);
  }
  return {summarize_values("rot_deg", rot), summarize_values("ex_mm", ex),
          summarize_values("ey_mm", ey), summarize_values("ez_pct", ez)};
}

std::string format_error_csv(std::span<const PoseErrorReport> reports) {
  std::string out = "sample_id,rot_deg,ex_mm,ey_mm,ez_pct\n";
  for (const auto& r : reports) {
    if (r.sample_id.find_first_of(",\n\"") != std::string::npos) {
      throw Error(ErrorCode::kInvalidInput, "error csv: sample id '" + r.sample_id +
                                                "' contains a separator");
    }
    out += r.sample_id + "," + number(r.rot_deg) + "," + number(r.ex_mm) + "," +
           number(r.ey_mm) + "," + number(r.ez_pct) + "\n";
  }
  return out;
}

std::vector<PoseErrorReport> parse_error_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,rot_deg,ex_mm,ey_mm,ez_pct") {
    throw Error(ErrorCode::kFormat, "error csv: unexpected header");
  }
  std::vector<PoseErrorReport> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw Error(ErrorCode::kParse, "error csv: line " + std::to_string(line_no) +
                                         " has " + std::to_string(fields.size()) + " fields");
    }
    PoseErrorReport r;
    r.sample_id = fields[0];
    try {
      r.rot_deg = std::stod(fields[1]);
      r.ex_mm = std::stod(fields[2]);
      r.ey_mm = std::stod(fields[3]);
      r.ez_pct = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, "error csv: bad number on line " + std::to_string(line_no));
    }
    out.push_back(r);
  }
  return out;
}

std::string format_summary_csv(std::span<const ErrorSummary> summaries) {
  std::string out = "metric,count,min,q1,median,q3,max,mean\n";
  for (const auto& s : summaries) {
    out += s.metric + "," + std::to_string(s.count) + "," + number(s.min) + "," + number(s.q1) +
           "," + number(s.median) + "," + number(s.q3) + "," + number(s.max) + "," +
           number(s.mean) + "\n";
  }
  return out;
}

}  // namespace ossireg
