// Copyright 2026 The windnorm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

namespace windnorm {
namespace {

using testing::random_points;

TEST(AngleStatsTest, IdentityFlipAndHalf) {
  const auto gt = testing::random_unit_vectors(100, 80);
  const auto same = angle_stats(gt, gt);
  EXPECT_NEAR(same.mean_deg, 0.0, 1e-6);
  EXPECT_NEAR(same.std_deg, 0.0, 1e-6);
  EXPECT_EQ(same.consistency_rate, 1.0);

  std::vector<Vec3> flipped, half;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    flipped.push_back(-gt[i]);
    half.push_back(i % 2 ? -gt[i] : gt[i]);
  }
  const auto f = angle_stats(flipped, gt);
  EXPECT_NEAR(f.mean_deg, 180.0, 1e-6);
  EXPECT_NEAR(f.std_deg, 0.0, 1e-6);
  EXPECT_EQ(f.consistency_rate, 0.0);
  const auto h = angle_stats(half, gt);
  EXPECT_NEAR(h.mean_deg, 90.0, 1e-6);
  EXPECT_EQ(h.consistency_rate, 0.5);

  std::size_t total = 0;
  for (auto c : h.histogram) total += c;
  EXPECT_EQ(total, gt.size());
  EXPECT_EQ(h.histogram.front(), 50u);
  EXPECT_EQ(h.histogram.back(), 50u);
}

TEST(AngleStatsTest, RightAngleIsNotConsistentAndLengthsMustMatch) {
  const std::vector<Vec3> a{{1, 0, 0}}, b{{0, 1, 0}};
  EXPECT_EQ(angle_stats(a, b).consistency_rate, 0.0);
  try {
    angle_stats(a, std::vector<Vec3>{{1, 0, 0}, {0, 1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Noise, ZeroLevelAndDeterminism) {
  const PointCloud c(random_points(100, 81));
  const auto z = add_noise(c, 0.0, RngSeed{1});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(z[i], c[i]);
  const auto a = add_noise(c, 0.01, RngSeed{2}), b = add_noise(c, 0.01, RngSeed{2});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Noise, SigmaFollowsDiagonal) {
  std::vector<Vec3> pts = random_points(10000, 82);
  pts[0] = {-1, -1, -1};
  pts[1] = {1, 1, 1};
  const PointCloud c(pts);
  const auto noisy = add_noise(c, 0.005, RngSeed{3});
  const double sigma = 0.005 * 2.0 * std::sqrt(3.0);
  for (int a = 0; a < 3; ++a) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s2 += std::pow(noisy[i][a] - c[i][a], 2);
    const double est = std::sqrt(s2 / static_cast<double>(c.size()));
    EXPECT_NEAR(est, sigma, 0.1 * sigma);
  }
}

TEST(Shapes, SphereOnUnitSurface) {
  const auto s = generate_shape({ShapeKind::Sphere, 10000, RngSeed{4}});
  ASSERT_EQ(s.cloud.size(), 10000u);
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    EXPECT_NEAR(norm(s.cloud[i]), 1.0, 1e-12);
    EXPECT_NEAR(dot(s.normals[i], s.cloud[i]), 1.0, 1e-12);
  }
}

TEST(Shapes, TorusNormalsMatchImplicitGradient) {
  for (std::uint64_t seed : {0u, 1u}) {
    const ShapeSpec spec{.kind = ShapeKind::Torus, .count = 3000, .seed = RngSeed{seed}};
    const auto s = generate_shape(spec);
    ASSERT_EQ(s.cloud.size(), 3000u);
    std::size_t outer = 0;
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
      const Vec3& p = s.cloud[i];
      const double rho = std::hypot(p.x, p.y);
      const double f = std::pow(rho - 1.0, 2) + p.z * p.z - 0.09;
      EXPECT_NEAR(f, 0.0, 1e-9);
      const Vec3 grad{2 * (rho - 1.0) * p.x / rho, 2 * (rho - 1.0) * p.y / rho, 2 * p.z};
      EXPECT_LT(distance(normalized(grad), s.normals[i]), 1e-9);
      outer += rho > 1.0;
    }
    // Area share of the outer half: 1/2 + r / (pi R).
    EXPECT_NEAR(static_cast<double>(outer) / 3000.0, 0.5 + 0.3 / std::numbers::pi, 0.01);
  }
}

TEST(Shapes, TwoSpheresKeepTheirGap) {
  const auto s = generate_shape({.kind = ShapeKind::TwoSpheres, .count = 1000, .seed = RngSeed{5}, .gap = 0.5});
  double min_cross = 1e9;
  for (std::size_t i = 0; i < 500; ++i)
    for (std::size_t j = 500; j < 1000; ++j) min_cross = std::min(min_cross, distance(s.cloud[i], s.cloud[j]));
  EXPECT_GE(min_cross, 0.5);
  const auto inside = ShapeSpec{.kind = ShapeKind::TwoSpheres, .gap = 0.5}.classifier();
  for (std::size_t i = 0; i < 1000; ++i) {
    EXPECT_TRUE(inside(s.cloud[i] - s.normals[i] * 0.01));
    EXPECT_FALSE(inside(s.cloud[i] + s.normals[i] * 0.01));
  }
}

TEST(Shapes, PlaneGridLayout) {
  const auto s = generate_shape({.kind = ShapeKind::PlaneGrid, .count = 100, .spacing = 0.1});
  ASSERT_EQ(s.cloud.size(), 100u);
  EXPECT_NEAR(distance(s.cloud[0], s.cloud[1]), 0.1, 1e-15);
  EXPECT_NEAR(distance(s.cloud[0], s.cloud[10]), 0.1, 1e-15);
  for (const auto& n : s.normals) EXPECT_EQ(n, (Vec3{0, 0, 1}));
}

TEST(Shapes, BadSpecsAreRejected) {
  auto kind_of = [](const ShapeSpec& spec) {
    try {
      generate_shape(spec);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  EXPECT_EQ(kind_of({ShapeKind::Sphere, 50}), ErrorKind::BadSpec);
  EXPECT_EQ(kind_of({.kind = ShapeKind::Torus, .major_radius = 0.2, .minor_radius = 0.3}), ErrorKind::BadSpec);
  EXPECT_EQ(kind_of({.kind = ShapeKind::PlaneGrid, .spacing = -1}), ErrorKind::BadSpec);
  EXPECT_EQ(kind_of({.kind = ShapeKind::TwoSpheres, .gap = 0}), ErrorKind::BadSpec);
}

TEST(Shapes, SameSeedSameSamples) {
  const ShapeSpec spec{.kind = ShapeKind::Torus, .count = 500, .seed = RngSeed{9}};
  const auto a = generate_shape(spec), b = generate_shape(spec);
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(a.cloud[i], b.cloud[i]);
}

TEST(InsideOut, CorrectAndSwappedPairs) {
  const auto inside = ShapeSpec{}.classifier();
  std::vector<SamplePair> good, swapped;
  for (const auto& n : testing::random_unit_vectors(30, 83)) {
    good.push_back({n * 1.1, n * 0.9});
    swapped.push_back({n * 0.9, n * 1.1});
  }
  EXPECT_EQ(inside_out_count(good, inside).inside_out, 0u);
  EXPECT_EQ(inside_out_count(swapped, inside).inside_out, 30u);
  EXPECT_EQ(inside_out_count(good, inside).same_side, 0u);
}

TEST(Chamfer, IdentityTranslationAndInterleavedGrids) {
  const auto a = random_points(300, 84);
  EXPECT_EQ(chamfer_points(a, a), 0.0);
  const Vec3 t{0.01, -0.02, 0.005};
  std::vector<Vec3> b;
  for (const auto& p : a) b.push_back(p + t);
  EXPECT_LE(chamfer_points(a, b), squared_norm(t) * (1 + 1e-12));

  const double h = 0.1;
  std::vector<Vec3> g1, g2;
  for (int i = 0; i < 50; ++i) {
    g1.push_back({h * i, 0, 0});
    g2.push_back({h * i + 0.5 * h, 0, 0});
  }
  EXPECT_NEAR(chamfer_points(g1, g2), 0.25 * h * h, 1e-15);
  EXPECT_THROW(chamfer_points(g1, {}), Error);
}

}  // namespace
}  // namespace windnorm
