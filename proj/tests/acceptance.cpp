// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Tolerances are fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ossireg/correspondence.hpp"
#include "ossireg/datagen.hpp"
#include "ossireg/error.hpp"
#include "ossireg/geodesic.hpp"
#include "ossireg/image.hpp"
#include "ossireg/metrics.hpp"
#include "ossireg/parameterization.hpp"
#include "ossireg/pnp.hpp"
#include "ossireg/raster.hpp"
#include "ossireg/shapes.hpp"

#include <unistd.h>

using namespace ossireg;
namespace fs = std::filesystem;

namespace {

// Geodesic accuracy.
constexpr int kGeodesicLevel = 4;
constexpr double kGeodesicRelTol = 0.02;
constexpr double kGeodesicSeconds = 10.0;
// Parameterization invariants.
constexpr double kHalfTol = 0.02;
// Noiseless round trip.
constexpr int kRoundTripPoses = 100;
constexpr std::uint64_t kRoundTripSeed = 20240601;
constexpr double kRoundTripRotDeg = 0.1;
constexpr double kRoundTripMm = 0.01;
constexpr double kRoundTripZPct = 0.01;
constexpr double kRoundTripSeconds = 60.0;
// Noise robustness.
constexpr double kNoiseGaussian = 0.02;
constexpr double kNoiseOutlier = 0.1;
constexpr double kRobustRotDeg = 25.0;
constexpr double kRobustExMm = 2.0;
constexpr double kRobustEyMm = 3.0;
constexpr double kRobustZPct = 0.55;
constexpr double kRobustPassFraction = 0.9;
// Solver math.
constexpr int kJacobianStates = 100;
constexpr double kJacobianRelTol = 1e-5;
constexpr double kPlanarRotDeg = 0.1;
constexpr double kPlanarMm = 0.1;
// Metric identities.
constexpr double kRotationIdentityTol = 1e-9;
constexpr int kSummaryTrials = 1000;
// Codec.
constexpr double kCodecTol = 1.0 / 65535.0;

const CameraModel kCamera = CameraModel::centered(1920, 1080, 50000.0);

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs a check; an escaping exception counts as a failure.
void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SurfaceMesh surface_of(const TriangleMesh& m) { return {m.vertices(), m.faces()}; }

const PatchShape kShape;

std::shared_ptr<const RegionMesh> full_region(TriangleMesh mesh) {
  auto shared = std::make_shared<const TriangleMesh>(std::move(mesh));
  return std::make_shared<const RegionMesh>(extract_full_region(shared));
}

const SurfaceParameterization& patch_param() {
  static const SurfaceParameterization p =
      parameterize(full_region(make_dome_patch(kShape)), dome_patch_vertex(kShape, 8, kShape.half_rows),
                   dome_patch_vertex(kShape, 2 * kShape.half_columns - 8, kShape.half_rows));
  return p;
}

// Worst relative error of the fast-marched field from the north pole.
double icosphere_error(int level) {
  const SurfaceMesh s = surface_of(make_icosphere(level));
  const std::vector<int> src = {0};
  const DistanceField f = fast_march(s, src);
  double worst = 0.0;
  for (int v = 1; v < s.vertex_count(); ++v) {
    const double exact = std::acos(std::clamp(s.positions[v].z(), -1.0, 1.0));
    worst = std::max(worst, std::abs(f.values[v] - exact) / exact);
  }
  return worst;
}

void geodesic_accuracy() {
  check("geodesic_accuracy", [] {
    const auto start = std::chrono::steady_clock::now();
    const SurfaceMesh s = surface_of(make_icosphere(kGeodesicLevel));
    const std::vector<int> src = {0};
    const DistanceField f = fast_march(s, src);
    const double pole = std::abs(f.values[1] - M_PI) / M_PI;
    const double e3 = icosphere_error(3), e4 = icosphere_error(4), e5 = icosphere_error(5);
    const double elapsed = seconds_since(start);
    const bool ok = pole <= kGeodesicRelTol && e4 <= kGeodesicRelTol && e3 > e4 && e4 > e5 &&
                    elapsed < kGeodesicSeconds;
    return std::pair{ok, fmt("pole-to-pole rel %.4f%%, max rel (3/4/5) %.3f%% / %.3f%% / %.3f%%, "
                             "%.2f s",
                             100 * pole, 100 * e3, 100 * e4, 100 * e5, elapsed)};
  });
}

struct InvariantStats {
  bool in_range = true;
  bool poles = true;
  bool meridian_increasing = true;
};

InvariantStats common_invariants(const SurfaceParameterization& p) {
  InvariantStats s;
  for (size_t i = 0; i < p.mu.size(); ++i) {
    if (!(p.mu[i] >= 0 && p.mu[i] <= 1 && p.nu[i] >= 0 && p.nu[i] <= 1)) s.in_range = false;
  }
  for (size_t i = 0; i < p.cut_mu.size(); ++i) {
    if (!(p.cut_mu[i] >= 0 && p.cut_mu[i] <= 1 && p.cut_nu[i] >= 0 && p.cut_nu[i] <= 1)) {
      s.in_range = false;
    }
  }
  s.poles = p.mu[p.alpha] == 0.0 && p.mu[p.beta] == 1.0;
  for (size_t i = 1; i < p.meridian_mu.size(); ++i) {
    if (!(p.meridian_mu[i] > p.meridian_mu[i - 1])) s.meridian_increasing = false;
  }
  return s;
}

void parameterization_invariants() {
  check("parameterization_invariants", [] {
    auto sphere_mesh = make_icosphere(4);
    const SurfaceParameterization sphere = parameterize(full_region(sphere_mesh), 0, 1);
    const InvariantStats a = common_invariants(sphere);
    // Equator: z = 0. Antimeridian: the equator vertex opposite the cut.
    double equator = 0.0;
    int equator_count = 0;
    const Vec3 mid = sphere.meridian.points[sphere.meridian.points.size() / 2].position;
    const Vec3 cut_dir = Vec3(mid.x(), mid.y(), 0.0).normalized();
    int opposite = -1;
    double opposite_dot = 1.0;
    for (int v = 0; v < sphere_mesh.vertex_count(); ++v) {
      const Vec3& p = sphere_mesh.vertices()[v];
      if (std::abs(p.z()) > 1e-9) continue;
      equator = std::max(equator, std::abs(sphere.mu[v] - 0.5));
      ++equator_count;
      if (cut_dir.dot(p) < opposite_dot) {
        opposite_dot = cut_dir.dot(p);
        opposite = v;
      }
    }
    const double sphere_anti = std::abs(sphere.nu[opposite] - 0.5);

    const SurfaceParameterization& patch = patch_param();
    const InvariantStats b = common_invariants(patch);
    double patch_mid = 0.0, patch_anti = 0.0;
    for (int r = 0; r <= 2 * kShape.half_rows; ++r) {
      patch_mid = std::max(patch_mid,
                           std::abs(patch.mu[dome_patch_vertex(kShape, kShape.half_columns, r)] - 0.5));
    }
    for (int col : {0, 4, 2 * kShape.half_columns - 4, 2 * kShape.half_columns}) {
      patch_anti = std::max(
          patch_anti, std::abs(patch.nu[dome_patch_vertex(kShape, col, kShape.half_rows)] - 0.5));
    }
    const bool ok = a.in_range && a.poles && a.meridian_increasing && b.in_range && b.poles &&
                    b.meridian_increasing && equator_count > 0 && opposite_dot < -0.99 &&
                    equator <= kHalfTol && sphere_anti <= kHalfTol && patch_mid <= kHalfTol &&
                    patch_anti <= kHalfTol;
    return std::pair{
        ok, fmt("range %s/%s, poles %s/%s, meridian increasing %s/%s; |mu-0.5| equator %.4f "
                "(sphere) %.4f (patch); |nu-0.5| antimeridian %.4f (sphere) %.4f (patch)",
                a.in_range ? "ok" : "bad", b.in_range ? "ok" : "bad", a.poles ? "ok" : "bad",
                b.poles ? "ok" : "bad", a.meridian_increasing ? "ok" : "bad",
                b.meridian_increasing ? "ok" : "bad", equator, patch_mid, sphere_anti, patch_anti)};
  });
}

struct RenderedSample {
  Pose pose;
  std::string png;  ///< encoded map; decoded when used
  std::uint64_t seed = 0;
};

const std::vector<RenderedSample>& rendered_samples() {
  static const std::vector<RenderedSample> samples = [] {
    const SurfaceParameterization& param = patch_param();
    PoseSampler sampler;
    Vec3 sum = Vec3::Zero();
    for (const Vec3& p : param.region->surface().positions) sum += p;
    sampler.anchor = sum / param.region->vertex_count();
    std::vector<RenderedSample> out;
    for (int i = 0; i < kRoundTripPoses; ++i) {
      const std::uint64_t seed = kRoundTripSeed ^ static_cast<std::uint64_t>(i);
      std::mt19937_64 rng(seed);
      for (int attempt = 0;; ++attempt) {
        const Pose pose = sampler.sample(rng);
        const CoordinateMap map = render_coordinate_map(param, kCamera, pose);
        if (map.valid_count() > 0) {
          out.push_back({pose, encode_map(map), seed});
          break;
        }
        if (attempt >= sampler.retry_limit) throw Error(ErrorCode::kDegenerate, "no visible pose");
      }
    }
    return out;
  }();
  return samples;
}

double quantile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return quantile(v, p);
}

void noiseless_round_trip() {
  check("noiseless_round_trip", [] {
    const auto start = std::chrono::steady_clock::now();
    const SurfaceParameterization& param = patch_param();
    const CorrespondenceIndex index = build_correspondence_index(param);
    double rot = 0, ex = 0, ey = 0, ez = 0;
    for (const RenderedSample& s : rendered_samples()) {
      const CorrespondenceSet corr = extract_correspondences(decode_map(s.png), param, index);
      const PnPResult r = solve_pnp(corr, kCamera);
      const PoseErrorReport e = compare_poses("", r.pose, s.pose, kCamera);
      rot = std::max(rot, e.rot_deg);
      ex = std::max(ex, e.ex_mm);
      ey = std::max(ey, e.ey_mm);
      ez = std::max(ez, e.ez_pct);
    }
    const double elapsed = seconds_since(start);
    const bool ok = rot < kRoundTripRotDeg && ex < kRoundTripMm && ey < kRoundTripMm &&
                    ez < kRoundTripZPct && elapsed < kRoundTripSeconds;
    return std::pair{ok, fmt("%d poses, worst rot %.2e deg, ex %.2e mm, ey %.2e mm, ez %.2e%%, "
                             "%.1f s (render, PNG, extract, solve)",
                             kRoundTripPoses, rot, ex, ey, ez, elapsed)};
  });
}

void noise_robustness() {
  check("noise_robustness", [] {
    const SurfaceParameterization& param = patch_param();
    const CorrespondenceIndex index = build_correspondence_index(param);
    int pass = 0, total = 0;
    std::vector<double> rots;
    for (const RenderedSample& s : rendered_samples()) {
      ++total;
      const std::vector<NoiseModel> noise = {{NoiseKind::kGaussian, kNoiseGaussian, s.seed ^ 1},
                                             {NoiseKind::kOutlier, kNoiseOutlier, s.seed ^ 2}};
      const CoordinateMap predicted = oracle_predict(decode_map(s.png), noise);
      RansacOptions ransac;
      ransac.seed = s.seed;
      try {
        const PnPResult r =
            solve_pnp_ransac(extract_correspondences(predicted, param, index), kCamera, ransac);
        const PoseErrorReport e = compare_poses("", r.pose, s.pose, kCamera);
        rots.push_back(e.rot_deg);
        if (e.rot_deg < kRobustRotDeg && e.ex_mm < kRobustExMm && e.ey_mm < kRobustEyMm &&
            e.ez_pct < kRobustZPct) {
          ++pass;
        }
      } catch (const Error&) {
        // Counts as a miss.
      }
    }
    const double fraction = static_cast<double>(pass) / total;
    return std::pair{fraction >= kRobustPassFraction,
                     fmt("%d/%d within 25 deg / 2 mm / 3 mm / 0.55%% (need %.0f%%), median rot "
                         "%.3f deg",
                         pass, total, 100 * kRobustPassFraction,
                         rots.empty() ? NAN : quantile_of(rots, 0.5))};
  });
}

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose p;
  p.rotation = rotation_from_vector(Vec3(0, 0, M_PI * u(rng))) *
               rotation_from_vector(Vec3(u(rng), u(rng), 0) * 0.5) *
               rotation_from_vector(Vec3(M_PI, 0, 0));
  p.translation = Vec3(4 * u(rng), 2 * u(rng), 500 + 100 * u(rng));
  return p;
}

std::vector<Vec3> patch_points(std::mt19937_64& rng, int n, double bump) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * u(rng), y = 1.5 * u(rng);
    pts.emplace_back(x, y, bump * std::exp(-(x * x + y * y)));
  }
  return pts;
}

void solver_math() {
  check("solver_math", [] {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 1.0);
    double jac_worst = 0.0;
    for (int state = 0; state < kJacobianStates; ++state) {
      const Pose pose = random_pose(rng);
      const auto pts = patch_points(rng, 5, 0.8);
      std::vector<Eigen::Vector2d> px;
      for (const Vec3& p : pts) {
        px.push_back(project(kCamera, pose, p) + Eigen::Vector2d(noise(rng), noise(rng)));
      }
      Eigen::VectorXd r;
      Eigen::MatrixXd jac;
      reprojection_residuals(kCamera, pose, pts, px, r, &jac);
      for (int k = 0; k < 6; ++k) {
        const double h = k < 3 ? 1e-7 : 1e-5;
        Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
        d[k] = h;
        Eigen::VectorXd plus, minus;
        reprojection_residuals(kCamera, apply_increment(pose, d), pts, px, plus);
        reprojection_residuals(kCamera, apply_increment(pose, -d), pts, px, minus);
        const Eigen::VectorXd fd = (plus - minus) / (2.0 * h);
        const double scale = std::max(1.0, jac.col(k).cwiseAbs().maxCoeff());
        jac_worst = std::max(jac_worst, (fd - jac.col(k)).cwiseAbs().maxCoeff() / scale);
      }
    }

    bool monotone = true;
    std::normal_distribution<double> pixel_noise(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      const Pose truth = random_pose(rng);
      const auto pts = patch_points(rng, 200, 0.8);
      std::vector<Eigen::Vector2d> px;
      for (const Vec3& p : pts) {
        px.push_back(project(kCamera, truth, p) +
                     Eigen::Vector2d(pixel_noise(rng), pixel_noise(rng)));
      }
      Eigen::Matrix<double, 6, 1> kick;
      kick << 0.05, -0.03, 0.08, 0.5, -0.4, 20.0;
      const PnPResult r = refine_pose(apply_increment(truth, kick), pts, px, kCamera);
      for (size_t i = 1; i < r.rms_history.size(); ++i) {
        if (r.rms_history[i] > r.rms_history[i - 1]) monotone = false;
      }
    }

    double planar_rot = 0.0, planar_t = 0.0;
    bool planar_used = true;
    for (int trial = 0; trial < 20; ++trial) {
      const Pose truth = random_pose(rng);
      CorrespondenceSet set;
      set.width = kCamera.width;
      set.height = kCamera.height;
      for (const Vec3& p : patch_points(rng, 30, 0.0)) {
        set.items.push_back({project(kCamera, truth, p), p, 1.0});
      }
      const PnPResult r = solve_pnp(set, kCamera);
      planar_used = planar_used && r.planar_initialization;
      planar_rot = std::max(planar_rot, rotation_error(r.pose.rotation, truth.rotation));
      planar_t = std::max(planar_t, (r.pose.translation - truth.translation).norm());
    }
    const bool ok = jac_worst < kJacobianRelTol && monotone && planar_used &&
                    planar_rot < kPlanarRotDeg && planar_t < kPlanarMm;
    return std::pair{ok, fmt("jacobian worst rel %.2e over %d states, rms monotone %s, planar "
                             "fallback %s worst %.2e deg / %.2e mm",
                             jac_worst, kJacobianStates, monotone ? "yes" : "no",
                             planar_used ? "used" : "NOT used", planar_rot, planar_t)};
  });
}

void metric_identities() {
  check("metric_identities", [] {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::Matrix3d r = rotation_from_vector(Vec3(0.4, -0.9, 1.3));
    const double r0 = rotation_error(r, r);
    const double r30 = rotation_error(r, r * rotation_from_vector(Vec3(0, 0, M_PI / 6)));
    const double r180 = rotation_error(r, r * rotation_from_vector(Vec3(M_PI, 0, 0)));
    const bool rot_ok = std::abs(r0) <= kRotationIdentityTol &&
                        std::abs(r30 - 30.0) <= kRotationIdentityTol &&
                        std::abs(r180 - 180.0) <= kRotationIdentityTol;

    Plane a(32, 24), b(32, 24), binary(32, 24);
    for (size_t i = 0; i < a.values.size(); ++i) {
      a.values[i] = u(rng);
      b.values[i] = u(rng);
      binary.values[i] = u(rng) < 0.5 ? 0.0 : 1.0;
    }
    const double self_ssim = ssim(a, a);
    const double self_mse = mse(a, a);
    const double binary_bce = bce(binary, binary);
    const double combined = combined_loss(a, b);
    const double composed = (bce(a, b) + mse(a, b) + (1.0 - ssim(a, b))) / 3.0;
    const bool loss_ok = std::abs(self_ssim - 1.0) < 1e-12 && self_mse == 0.0 &&
                         binary_bce < 1e-6 && std::abs(combined - composed) < 1e-15;

    bool ordered = true;
    std::lognormal_distribution<double> heavy(0.0, 1.5);
    for (int trial = 0; trial < kSummaryTrials; ++trial) {
      std::vector<double> v(1 + rng() % 50);
      for (double& x : v) x = heavy(rng);
      const ErrorSummary s = summarize_values("x", v);
      ordered = ordered && s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max;
    }
    return std::pair{rot_ok && loss_ok && ordered,
                     fmt("rotation |err| 0/30/180: %.1e / %.1e / %.1e deg; ssim(x,x)-1 %.1e, "
                         "mse(x,x) %.1e, bce binary %.1e, combined - parts %.1e; five-number "
                         "order %s over %d sets",
                         std::abs(r0), std::abs(r30 - 30), std::abs(r180 - 180), self_ssim - 1,
                         self_mse, binary_bce, combined - composed, ordered ? "holds" : "broken",
                         kSummaryTrials)};
  });
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[fs::relative(entry.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

// Every command run twice from scratch in the same directory.
std::map<std::string, std::string> run_commands(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string tool = OSSIREG_TOOL;
  const std::string cfg = (dir / "case" / "case.json").string();
  const std::string d = dir.string();
  const std::vector<std::string> commands = {
      "demo -o " + d + "/case -n 2 --seed 7",
      "parameterize -c " + cfg + " -o " + d + "/param_again.txt",
      "render -c " + cfg + " -p " + d + "/case/dataset/poses/s0000.json -m " + d +
          "/map.png --overlay " + d + "/overlay.png --background " + d +
          "/case/dataset/frames/s0000.png",
      "solve -c " + cfg + " -m " + d + "/map.png -o " + d + "/pose.json --diagnostics " + d +
          "/diag.json",
      "solve -c " + cfg + " -m " + d + "/map.png -o " + d + "/pose_r.json --ransac --seed 3",
      "eval --truth " + d + "/case/dataset/poses --pred " + d + "/case/dataset/poses -o " + d +
          "/eval --truth-maps " + d + "/case/dataset/maps --pred-maps " + d +
          "/case/dataset/maps",
      "synth -c " + cfg + " -o " + d + "/synth -n 2 --seed 5 --patches 2",
      "bench -c " + cfg + " -o " + d + "/bench -n 2 --seed 9 --noise none --noise "
          "gaussian=0.02+outlier=0.1",
  };
  for (const std::string& c : commands) {
    const std::string line = tool + " " + c + " >/dev/null 2>&1";
    if (std::system(line.c_str()) != 0) throw std::runtime_error("command failed: " + c);
  }
  return snapshot(dir);
}

void codec_and_determinism() {
  check("codec_and_determinism", [] {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CoordinateMap map(97, 61, false);
    for (size_t i = 0; i < map.mu.size(); ++i) {
      map.mu[i] = u(rng);
      map.nu[i] = u(rng);
      map.valid[i] = u(rng) < 0.7;
    }
    map.mu[0] = 0.0;
    map.nu[0] = 1.0;
    map.valid[0] = 1;
    const CoordinateMap back = decode_map(encode_map(map));
    double worst = 0.0;
    bool mask_same = back.valid == map.valid;
    for (size_t i = 0; i < map.mu.size(); ++i) {
      if (!map.valid[i]) continue;
      worst = std::max({worst, std::abs(back.mu[i] - map.mu[i]), std::abs(back.nu[i] - map.nu[i])});
    }
    const bool reencode = encode_map(back) == encode_map(map);

    const fs::path dir =
        fs::temp_directory_path() / ("ossireg_acceptance_" + std::to_string(getpid()));
    const auto first = run_commands(dir);
    const auto second = run_commands(dir);
    fs::remove_all(dir);
    std::vector<std::string> differing;
    for (const auto& [name, bytes] : first) {
      const auto it = second.find(name);
      if (it == second.end() || it->second != bytes) differing.push_back(name);
    }
    if (first.size() != second.size()) differing.push_back("(file set)");
    const bool ok = worst <= kCodecTol && mask_same && reencode && differing.empty();
    std::string detail = fmt("map codec worst %.2e (tol %.2e), mask %s, re-encode %s; %zu output "
                             "files over 8 commands, %zu differ",
                             worst, kCodecTol, mask_same ? "kept" : "changed",
                             reencode ? "identical" : "differs", first.size(), differing.size());
    for (const auto& name : differing) detail += " " + name;
    return std::pair{ok, detail};
  });
}

}  // namespace

int main() {
  geodesic_accuracy();
  parameterization_invariants();
  noiseless_round_trip();
  noise_robustness();
  solver_math();
  metric_identities();
  codec_and_determinism();
  std::printf("%s: %d failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
