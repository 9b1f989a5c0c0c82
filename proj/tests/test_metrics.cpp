#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ossireg/error.hpp"
#include "ossireg/metrics.hpp"

using namespace ossireg;

namespace {

const CameraModel kCam = CameraModel::centered(1920, 1080, 50000.0);

Plane random_plane(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane p(w, h);
  for (double& v : p.values) v = u(rng);
  return p;
}

// Direct per-window SSIM, no summed-area tables.
double naive_ssim(const Plane& a, const Plane& b, const SsimOptions& o) {
  const int k = o.window;
  double total = 0.0;
  int windows = 0;
  for (int y = 0; y + k <= a.height; ++y) {
    for (int x = 0; x + k <= a.width; ++x) {
      double ma = 0, mb = 0;
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
          ma += a.at(x + i, y + j);
          mb += b.at(x + i, y + j);
        }
      }
      ma /= k * k;
      mb /= k * k;
      double va = 0, vb = 0, cov = 0;
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
          const double da = a.at(x + i, y + j) - ma, db = b.at(x + i, y + j) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      }
      va /= k * k;
      vb /= k * k;
      cov /= k * k;
      const double sa = std::sqrt(va), sb = std::sqrt(vb);
      const double l = (2 * ma * mb + o.c1) / (ma * ma + mb * mb + o.c1);
      const double c = (2 * sa * sb + o.c2) / (va + vb + o.c2);
      const double s = (cov + o.c3) / (sa * sb + o.c3);
      total += std::pow(l, o.alpha) * std::pow(c, o.beta) * std::pow(s, o.gamma);
      ++windows;
    }
  }
  return total / windows;
}

}  // namespace

TEST(RotationError, Examples) {
  const Eigen::Matrix3d r = rotation_from_vector(Vec3(0.3, -1.0, 0.4));
  EXPECT_NEAR(rotation_error(r, r), 0.0, 1e-9);
  EXPECT_NEAR(rotation_error(r, r * rotation_from_vector(Vec3(0, 0, M_PI / 6))), 30.0, 1e-9);
  EXPECT_NEAR(rotation_error(r, r * rotation_from_vector(Vec3(M_PI, 0, 0))), 180.0, 1e-9);
  EXPECT_THROW(rotation_error(r, 2.0 * r), Error);
}

TEST(RotationError, SymmetricLeftInvariantAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const auto a = rotation_from_vector(Vec3(u(rng), u(rng), u(rng)));
    const auto b = rotation_from_vector(Vec3(u(rng), u(rng), u(rng)));
    const auto c = rotation_from_vector(Vec3(u(rng), u(rng), u(rng)));
    EXPECT_NEAR(rotation_error(a, b), rotation_error(b, a), 1e-9);
    EXPECT_LE(rotation_error(a, c), rotation_error(a, b) + rotation_error(b, c) + 1e-9);
    EXPECT_NEAR(rotation_error(c * a, c * b), rotation_error(a, b), 1e-9);
    EXPECT_LE(rotation_error(a, b), 180.0);
  }
}

TEST(TranslationError, Examples) {
  const TranslationError zero = translation_error(Vec3(1, 2, 500), Vec3(1, 2, 500), kCam);
  EXPECT_EQ(zero.ex_mm, 0.0);
  EXPECT_EQ(zero.ez_pct, 0.0);
  const TranslationError e = translation_error(Vec3(2, 3, 775), Vec3(0, 0, 500), kCam);
  EXPECT_DOUBLE_EQ(e.ex_mm, 2.0);
  EXPECT_DOUBLE_EQ(e.ey_mm, 3.0);
  EXPECT_DOUBLE_EQ(e.ez_pct, 0.55);
  EXPECT_DOUBLE_EQ(translation_error(Vec3(0, 0, 0), Vec3(0, 0, 500), kCam).ez_pct, 1.0);
  // Absolute values.
  EXPECT_DOUBLE_EQ(translation_error(Vec3(-2, 0, 0), Vec3(0, 0, 0), kCam).ex_mm, 2.0);
}

TEST(Bce, Examples) {
  Plane half(8, 8, 0.5);
  EXPECT_NEAR(bce(half, half), std::log(2.0), 1e-12);
  Plane one(8, 8, 1.0), almost(8, 8, 1.0 - 1e-7);
  EXPECT_NEAR(bce(one, almost), 0.0, 1e-6);
  EXPECT_THROW(bce(Plane(8, 8, 1.5), half), Error);
  EXPECT_THROW(bce(half, Plane(4, 4, 0.5)), Error);
}

TEST(Bce, MinimizedAtTarget) {
  const Plane target(6, 6, 0.3);
  double best = 1e300, best_s = -1;
  for (int i = 1; i < 1000; ++i) {
    const double s = i / 1000.0;
    const double v = bce(target, Plane(6, 6, s));
    if (v < best) {
      best = v;
      best_s = s;
    }
  }
  EXPECT_NEAR(best_s, 0.3, 1e-3);
}

TEST(Mse, Examples) {
  std::mt19937_64 rng(2);
  const Plane a = random_plane(9, 7, rng), b = random_plane(9, 7, rng);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(Plane(4, 4, 0.0), Plane(4, 4, 0.5)), 0.25);
  EXPECT_EQ(mse(a, b), mse(b, a));
}

TEST(Ssim, MatchesDirectWindows) {
  std::mt19937_64 rng(3);
  Plane a = random_plane(23, 17, rng), b = random_plane(23, 17, rng);
  for (size_t i = 0; i < a.values.size(); ++i) b.values[i] = 0.6 * a.values[i] + 0.4 * b.values[i];
  SsimOptions o;
  EXPECT_NEAR(ssim(a, b, o), naive_ssim(a, b, o), 1e-9);
  o.alpha = 0.5;
  o.beta = 2.0;
  o.gamma = 1.5;
  o.window = 5;
  // Keep s positive so the fractional power is defined.
  EXPECT_NEAR(ssim(a, b, o), naive_ssim(a, b, o), 1e-9);
}

TEST(Ssim, Examples) {
  std::mt19937_64 rng(4);
  const Plane a = random_plane(20, 20, rng), b = random_plane(20, 20, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(Plane(10, 10, 0.0), Plane(10, 10, 1.0)), c1 / (1.0 + c1), 1e-12);
  EXPECT_THROW(ssim(Plane(5, 5), Plane(5, 5)), Error);  // smaller than the window
}

TEST(Combined, Composition) {
  std::mt19937_64 rng(5);
  const Plane a = random_plane(12, 12, rng), b = random_plane(12, 12, rng);
  EXPECT_NEAR(combined_loss(a, b), (bce(a, b) + mse(a, b) + 1.0 - ssim(a, b)) / 3.0, 1e-15);
  Plane binary(10, 10);
  for (size_t i = 0; i < binary.values.size(); ++i) binary.values[i] = double(i % 3 == 0);
  EXPECT_NEAR(combined_loss(binary, binary), 0.0, 1e-6);
}

TEST(Combined, IncreasesWithConstantOffset) {
  const Plane target(10, 10, 0.5);
  double previous = combined_loss(target, target);
  for (int i = 1; i < 40; ++i) {
    const double v = combined_loss(target, Plane(10, 10, 0.5 + 0.012 * i));
    EXPECT_GT(v, previous) << i;
    previous = v;
  }
}

TEST(MapLosses, UnionMaskAndInvalidZero) {
  CoordinateMap a(10, 10, false), b(10, 10, false);
  for (int i = 0; i < 100; ++i) {
    a.mu[i] = b.mu[i] = 0.01 * i;
    a.nu[i] = b.nu[i] = 0.5;
    a.valid[i] = b.valid[i] = 1;
  }
  MapLosses same = compare_maps(a, b);
  EXPECT_EQ(same.mse, 0.0);
  EXPECT_NEAR(same.ssim, 1.0, 1e-9);
  // Garbage under pixels invalid in both maps is ignored.
  a.valid[5] = b.valid[5] = 0;
  a.mu[5] = 0.9;
  b.mu[5] = 0.1;
  EXPECT_EQ(compare_maps(a, b).mse, 0.0);
  // A pixel valid in one map only counts against 0 in the other.
  b.valid[7] = 0;
  const double expected = (a.mu[7] * a.mu[7] + 0.25) / (2.0 * 99.0);
  EXPECT_NEAR(compare_maps(a, b).mse, expected, 1e-15);
  EXPECT_EQ(map_planes(b)[0].at(7, 0), 0.0);
}

TEST(Summary, Quantiles) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_EQ(quantile(v, 0.5), 3.0);
  EXPECT_EQ(quantile(v, 0.25), 2.0);
  EXPECT_EQ(quantile(v, 0.75), 4.0);
  const std::vector<double> w = {1, 2, 3, 4};
  EXPECT_EQ(quantile(w, 0.5), 2.5);
  EXPECT_EQ(quantile(w, 0.25), 1.75);
  const std::vector<double> single = {7.5};
  const ErrorSummary s = summarize_values("x", single);
  EXPECT_EQ(s.min, 7.5);
  EXPECT_EQ(s.q1, 7.5);
  EXPECT_EQ(s.median, 7.5);
  EXPECT_EQ(s.q3, 7.5);
  EXPECT_EQ(s.max, 7.5);
  EXPECT_THROW(summarize(std::vector<PoseErrorReport>{}), Error);
}

TEST(Summary, OrderInvariantOnRandomSamples) {
  std::mt19937_64 rng(6);
  std::lognormal_distribution<double> d(0.0, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (double& x : v) x = d(rng);
    const ErrorSummary s = summarize_values("x", v);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
    EXPECT_EQ(s.count, static_cast<int>(v.size()));
    EXPECT_LE(s.min, s.mean);
    EXPECT_LE(s.mean, s.max);
  }
}

TEST(Csv, ErrorRowsRoundTrip) {
  std::vector<PoseErrorReport> reports;
  for (int i = 0; i < 30; ++i) {
    reports.push_back({"f" + std::to_string(i), 0.1 * i, 1.0 / (i + 1), 0.5, 0.01 * i});
  }
  const std::string csv = format_error_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,rot_deg,ex_mm,ey_mm,ez_pct");
  const auto back = parse_error_csv(csv);
  ASSERT_EQ(back.size(), 30u);
  EXPECT_EQ(back[3].ex_mm, reports[3].ex_mm);
  EXPECT_EQ(back[29].sample_id, "f29");
  const auto summary = summarize(reports);
  ASSERT_EQ(summary.size(), 4u);
  EXPECT_EQ(summary[0].metric, "rot_deg");
  EXPECT_EQ(summary[0].count, 30);
  const std::string sc = format_summary_csv(summary);
  EXPECT_EQ(std::count(sc.begin(), sc.end(), '\n'), 5);
  EXPECT_THROW(parse_error_csv("sample_id,rot_deg\nx,1\n"), Error);
}
