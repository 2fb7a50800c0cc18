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

#include <limits>
#include <sstream>

#include "support.hpp"

namespace windnorm {
namespace {

using testing::random_points;

bool has_vertex(const VoronoiCell& cell, const Vec3& v, double tol) {
  for (const auto& c : cell.candidates) {
    if (distance(c, v) <= tol) return true;
  }
  return false;
}

TEST(Voronoi, CubeCornersShareCenterVertex) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  const auto d = build_diagram(PointCloud(pts), 2.0);
  ASSERT_EQ(d.size(), 8u);
  for (const auto& cell : d.cells) {
    EXPECT_TRUE(has_vertex(cell, {0.5, 0.5, 0.5}, 1e-12));
  }
}

TEST(Voronoi, TwoSeedsSplitTheBox) {
  const auto d = build_diagram(PointCloud({{-0.5, 0, 0}, {0.5, 0, 0}}), 2.0, 2);
  ASSERT_EQ(d.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& cell = d.cells[i];
    EXPECT_EQ(cell.candidates.size(), 8u);
    const double sx = i == 0 ? -1.0 : 1.0;
    for (const auto& v : cell.candidates) {
      EXPECT_TRUE(std::abs(v.x) < 1e-12 || std::abs(v.x - sx) < 1e-12) << v.x;
      EXPECT_NEAR(std::abs(v.y), 1.0, 1e-12);
      EXPECT_NEAR(std::abs(v.z), 1.0, 1e-12);
    }
  }
  EXPECT_TRUE(d.cells[0].contains({-0.3, 0.2, 0.1}));
  EXPECT_FALSE(d.cells[1].contains({-0.3, 0.2, 0.1}));
}

TEST(Voronoi, CandidatesPassEquidistanceAudit) {
  const auto pts = random_points(200, 21);
  const auto d = build_diagram(PointCloud(pts), 2.0);
  std::size_t interior = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& cell = d.cells[i];
    ASSERT_EQ(cell.candidates.size(), cell.on_clip_box.size());
    for (std::size_t k = 0; k < cell.candidates.size(); ++k) {
      const Vec3& v = cell.candidates[k];
      const double own = distance(v, pts[i]);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : pts) best = std::min(best, distance(v, p));
      EXPECT_LE(own - best, 1e-9);
      if (!cell.on_clip_box[k]) {
        ++interior;
        // An interior vertex is equidistant to at least four seeds.
        int ties = 0;
        for (const auto& p : pts) ties += std::abs(distance(v, p) - own) <= 1e-9 ? 1 : 0;
        EXPECT_GE(ties, 4);
      } else {
        EXPECT_TRUE(d.clip_box.contains(v, 1e-12));
      }
    }
  }
  EXPECT_GT(interior, 0u);
}

TEST(Voronoi, MembershipMatchesNearestSeed) {
  const auto pts = random_points(200, 22);
  const auto d = build_diagram(PointCloud(pts), 2.0);
  const KdTree tree(pts);
  const auto probes = random_points(20000, 23);
  std::size_t agree = 0;
  for (const auto& q : probes) {
    const auto near = tree.nearest(q).index;
    if (d.cells[near].contains(q, 1e-12)) ++agree;
  }
  EXPECT_EQ(agree, probes.size());
}

TEST(Voronoi, RejectsDuplicatesAndTinyClouds) {
  try {
    build_diagram(PointCloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicatePoints);
  }
  EXPECT_THROW(build_diagram(PointCloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}})), Error);
}

TEST(Voronoi, CandidateCsvDump) {
  const auto d = build_diagram(PointCloud(random_points(10, 24)));
  std::ostringstream os;
  write_candidates_csv(os, d);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("seed_index,x,y,z,on_clip_box\n", 0), 0u);
  std::size_t rows = 0;
  for (const auto& c : d.cells) rows += c.candidates.size();
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), rows + 1);
}

VoronoiDiagram single_cell(const Vec3& seed, std::vector<Vec3> cands) {
  VoronoiDiagram d;
  d.seeds = {seed};
  VoronoiCell cell;
  cell.on_clip_box.assign(cands.size(), false);
  cell.candidates = std::move(cands);
  d.cells = {cell};
  return d;
}

TEST(Samples, ExactAlignment) {
  const Vec3 p{0.3, -0.2, 0.1}, n{0, 0, 1}, t{1, 0, 0};
  const auto d = single_cell(p, {p + n, p - n, p + t});
  const auto s = select_samples(d, 0, n);
  EXPECT_EQ(s.plus, p + n);
  EXPECT_EQ(s.minus, p - n);
  const auto f = select_samples(d, 0, -n);
  EXPECT_EQ(f.plus, s.minus);
  EXPECT_EQ(f.minus, s.plus);
}

TEST(Samples, TiesGoToLowestIndex) {
  const Vec3 p{0, 0, 0}, n{0, 0, 1};
  const auto d = single_cell(p, {{0, 0, -1}, {1, 0, 1}, {-1, 0, 1}});
  const auto s = select_samples(d, 0, n);
  EXPECT_EQ(s.plus_index, 1u);
  const auto d2 = single_cell(p, {{0, 0, -1}, {-1, 0, 1}, {1, 0, 1}});
  EXPECT_EQ(select_samples(d2, 0, n).plus, (Vec3{-1, 0, 1}));
}

TEST(Samples, DegenerateCellThrows) {
  const Vec3 p{0, 0, 0};
  try {
    select_samples(single_cell(p, {p, p}), 0, {0, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyCell);
  }
}

TEST(Samples, PlusLeansAlongNormalOnSphere) {
  auto shape = generate_shape({ShapeKind::Sphere, 500, RngSeed{3}});
  const auto d = build_diagram(shape.cloud);
  const auto s = select_all_samples(d, shape.normals);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3& p = shape.cloud[i];
    EXPECT_GT(dot(s[i].plus - p, shape.normals[i]), 0.0);
    EXPECT_LT(dot(s[i].minus - p, shape.normals[i]), 0.0);
  }
}

}  // namespace
}  // namespace windnorm
