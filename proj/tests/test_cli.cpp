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

#include <fstream>
#include <iterator>
#include <sstream>

#include "support.hpp"
#include "windnorm/cli.hpp"

namespace windnorm {
namespace {

namespace fs = std::filesystem;

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "windnorm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

TEST_F(Cli, SynthSphereWritesUnitRows) {
  ASSERT_EQ(cli_run({"synth", "--shape", "sphere", "--n", "2000", "--seed", "0", "--out", path("s.xyz")}), 0);
  std::ifstream in(path("s.xyz"));
  const auto d = read_xyz(in);
  ASSERT_EQ(d.points.size(), 2000u);
  for (const auto& p : d.points) EXPECT_NEAR(norm(p), 1.0, 1e-12);
  std::ifstream gt(path("s.gt.xyz"));
  const auto g = read_xyz(gt);
  ASSERT_TRUE(g.has_normals());
  EXPECT_EQ(g.points, d.points);
}

TEST_F(Cli, SynthTorusSidecarSatisfiesImplicitGradient) {
  ASSERT_EQ(cli_run({"synth", "--shape", "torus", "--R", "1", "--r", "0.3", "--n", "3000", "--out", path("t.xyz"),
                     "--gt", path("t_normals.xyz")}),
            0);
  std::ifstream in(path("t_normals.xyz"));
  const auto d = read_xyz(in);
  ASSERT_EQ(d.points.size(), 3000u);
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    const Vec3& p = d.points[i];
    const double rho = std::hypot(p.x, p.y);
    const Vec3 grad{(rho - 1.0) * p.x / rho, (rho - 1.0) * p.y / rho, p.z};
    EXPECT_LT(distance(normalized(grad), d.normals[i]), 1e-9);
  }
}

TEST_F(Cli, SynthIsByteIdenticalAcrossRuns) {
  for (const char* name : {"a.xyz", "b.xyz"}) {
    ASSERT_EQ(cli_run({"synth", "--shape", "two-spheres", "--n", "400", "--seed", "3", "--out", path(name)}), 0);
  }
  EXPECT_EQ(slurp(path("a.xyz")), slurp(path("b.xyz")));
  EXPECT_EQ(slurp(path("a.gt.xyz")), slurp(path("b.gt.xyz")));
}

TEST_F(Cli, SynthRejectsUnknownShape) {
  EXPECT_EQ(cli_run({"synth", "--shape", "cube", "--out", path("c.xyz")}), 1);
}

TEST_F(Cli, OrientWritesPlyAndReport) {
  ASSERT_EQ(cli_run({"synth", "--n", "300", "--seed", "0", "--out", path("s.xyz")}), 0);
  const int code = cli_run({"orient", path("s.xyz"), "--seed", "0", "--out", path("o.ply"), "--report",
                            path("r.json"), "--voronoi-dump", path("v.csv"), "--quiet"});
  EXPECT_TRUE(code == 0 || code == 2);
  std::ifstream ply(path("o.ply"));
  const auto d = read_ply(ply);
  ASSERT_EQ(d.points.size(), 300u);
  ASSERT_EQ(d.normals.size(), 300u);
  for (const auto& n : d.normals) EXPECT_NEAR(norm(n), 1.0, 1e-9);

  const auto r = load_json(path("r.json"));
  EXPECT_EQ(r["schema"], 1);
  EXPECT_EQ(r["input"]["n"], 300);
  EXPECT_EQ(r["trace"].size(), r["result"]["iterations"].get<std::size_t>());
  EXPECT_EQ(code == 0, r["result"]["converged"].get<bool>());
  EXPECT_TRUE(r.contains("peak_memory_kb"));
  EXPECT_FALSE(r.contains("angle_stats"));
  EXPECT_EQ(slurp(path("v.csv")).rfind("seed_index,x,y,z,on_clip_box\n", 0), 0u);

  // Positions come back in the input frame.
  std::ifstream src(path("s.xyz"));
  const auto s = read_xyz(src);
  for (std::size_t i = 0; i < s.points.size(); ++i) EXPECT_LT(distance(s.points[i], d.points[i]), 1e-12);
}

TEST_F(Cli, OrientWithGroundTruthReportsAngles) {
  ASSERT_EQ(cli_run({"synth", "--n", "300", "--seed", "1", "--out", path("s.xyz")}), 0);
  cli_run({"orient", path("s.xyz"), "--noise", "0.005", "--gt-normals", path("s.gt.xyz"), "--max-iters", "30",
           "--report", path("r.json"), "--histogram", path("h.csv"), "--out", path("o.ply"), "--quiet"});
  const auto r = load_json(path("r.json"));
  ASSERT_TRUE(r.contains("angle_stats"));
  EXPECT_EQ(r["angle_stats"]["histogram"].size(), kHistogramBins);
  EXPECT_TRUE(r["angle_stats"].contains("mean_deg"));
  EXPECT_EQ(slurp(path("h.csv")).rfind("bin_start_deg,count\n", 0), 0u);
}

TEST_F(Cli, OrientStoppedEarlyExitsWithTwo) {
  ASSERT_EQ(cli_run({"synth", "--n", "200", "--out", path("s.xyz")}), 0);
  EXPECT_EQ(cli_run({"orient", path("s.xyz"), "--max-iters", "1", "--out", path("o.ply"), "--quiet"}), 2);
}

TEST_F(Cli, MalformedInputCitesLine) {
  {
    std::ofstream f(path("bad.xyz"));
    f << "0 0 0\n1 0 0\n1.0 2.0\n0 1 0\n";
  }
  ::testing::internal::CaptureStderr();
  const int code = cli_run({"orient", path("bad.xyz"), "--out", path("o.ply")});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 1);
  EXPECT_NE(err.find("bad.xyz:3"), std::string::npos) << err;
}

TEST_F(Cli, MissingFileAndBadArguments) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli_run({"orient", path("nope.xyz")}), 1);
  EXPECT_EQ(cli_run({"orient"}), 1);
  EXPECT_EQ(cli_run({"frobnicate"}), 1);
  EXPECT_EQ(cli_run({"orient", path("nope.xyz"), "--seed", "abc"}), 1);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(Cli, EvalIdentityFlipAndOffset) {
  const auto pts = testing::random_points(50, 90);
  const auto nrm = testing::random_unit_vectors(50, 91);
  std::vector<Vec3> flipped, moved;
  for (std::size_t i = 0; i < 50; ++i) {
    flipped.push_back(-nrm[i]);
    moved.push_back(pts[i] + Vec3{5, 0, 0});
  }
  write_file(path("gt.ply"), [&](std::ostream& os) { write_ply(os, pts, nrm); });
  write_file(path("flip.xyz"), [&](std::ostream& os) { write_xyz(os, pts, flipped); });
  write_file(path("moved.ply"), [&](std::ostream& os) { write_ply(os, moved, nrm); });

  ASSERT_EQ(cli_run({"eval", path("gt.ply"), path("gt.ply"), "--report", path("same.json")}), 0);
  const auto same = load_json(path("same.json"));
  EXPECT_NEAR(same["angle_stats"]["mean_deg"].get<double>(), 0.0, 1e-6);
  EXPECT_EQ(same["chamfer"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(path("same.json.hist.csv")));

  ASSERT_EQ(cli_run({"eval", path("flip.xyz"), path("gt.ply"), "--report", path("flip.json")}), 0);
  EXPECT_NEAR(load_json(path("flip.json"))["angle_stats"]["mean_deg"].get<double>(), 180.0, 1e-6);

  ASSERT_EQ(cli_run({"eval", path("moved.ply"), path("gt.ply"), "--report", path("moved.json")}), 0);
  EXPECT_LE(load_json(path("moved.json"))["chamfer"].get<double>(), 25.0 * (1 + 1e-12));
}

TEST_F(Cli, EvalNeedsNormalsAndMatchingCounts) {
  const auto pts = testing::random_points(20, 92);
  const auto nrm = testing::random_unit_vectors(20, 93);
  write_file(path("a.xyz"), [&](std::ostream& os) { write_xyz(os, pts); });
  write_file(path("b.xyz"), [&](std::ostream& os) { write_xyz(os, pts, nrm); });
  const std::vector<Vec3> fewer(pts.begin(), pts.begin() + 10), fewer_n(nrm.begin(), nrm.begin() + 10);
  write_file(path("c.xyz"), [&](std::ostream& os) { write_xyz(os, fewer, fewer_n); });
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli_run({"eval", path("a.xyz"), path("b.xyz"), "--report", path("r.json")}), 1);
  EXPECT_EQ(cli_run({"eval", path("c.xyz"), path("b.xyz"), "--report", path("r2.json")}), 1);
  ::testing::internal::GetCapturedStderr();
  const auto r2 = load_json(path("r2.json"));
  EXPECT_TRUE(r2["angle_stats"].is_null());
  EXPECT_TRUE(r2.contains("chamfer"));
}

}  // namespace
}  // namespace windnorm
