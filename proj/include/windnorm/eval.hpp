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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windnorm/core.hpp"
#include "windnorm/kdtree.hpp"
#include "windnorm/parallel.hpp"
#include "windnorm/voronoi.hpp"

namespace windnorm {

inline constexpr std::size_t kHistogramBins = 36;

struct AngleStats {
  double mean_deg = 0.0;
  double std_deg = 0.0;
  std::array<std::size_t, kHistogramBins> histogram{};  // 5-degree bins over [0, 180]
  double consistency_rate = 0.0;                        // fraction with angle < 90 degrees
  std::vector<double> angles_deg;
};

/// Angular discrepancy between predicted and ground-truth unit normals.
inline AngleStats angle_stats(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "predicted " + std::to_string(pred.size()) + " normals vs " + std::to_string(gt.size()) + " ground truth");
  }
  AngleStats st;
  const std::size_t n = pred.size();
  if (n == 0) return st;
  st.angles_deg.resize(n);
  std::size_t consistent = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::clamp(dot(pred[i], gt[i]), -1.0, 1.0);
    const double deg = std::acos(c) * 180.0 * std::numbers::inv_pi;
    st.angles_deg[i] = deg;
    sum += deg;
    if (deg < 90.0) ++consistent;
    const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(deg / 5.0));
    ++st.histogram[bin];
  }
  st.mean_deg = sum / static_cast<double>(n);
  double var = 0.0;
  for (double a : st.angles_deg) var += (a - st.mean_deg) * (a - st.mean_deg);
  st.std_deg = std::sqrt(var / static_cast<double>(n));
  st.consistency_rate = static_cast<double>(consistent) / static_cast<double>(n);
  return st;
}

/// Gaussian perturbation with sigma = level * bbox diagonal on every coordinate.
inline PointCloud add_noise(const PointCloud& cloud, double level, RngSeed seed) {
  if (!(level >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be >= 0");
  if (level == 0.0) return PointCloud(std::vector<Vec3>(cloud.points().begin(), cloud.points().end()));
  const double sigma = level * cloud.bbox().diagonal();
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    const double dx = rng.gaussian(), dy = rng.gaussian(), dz = rng.gaussian();
    out.push_back(p + Vec3{dx, dy, dz} * sigma);
  }
  return PointCloud(std::move(out));
}

enum class ShapeKind { Sphere, Torus, PlaneGrid, TwoSpheres };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  std::size_t count = 1000;
  RngSeed seed{};
  double major_radius = 1.0;  // torus R
  double minor_radius = 0.3;  // torus r
  double spacing = 0.02;      // plane-grid h
  double gap = 0.5;           // two-spheres

  void validate() const {
    const bool closed = kind != ShapeKind::PlaneGrid;
    if (closed && count < 100) throw Error(ErrorKind::BadSpec, "closed shapes need at least 100 points");
    if (!closed && count < 4) throw Error(ErrorKind::BadSpec, "plane grid needs at least 4 points");
    if (kind == ShapeKind::Torus && !(major_radius > minor_radius && minor_radius > 0.0)) {
      throw Error(ErrorKind::BadSpec, "torus needs R > r > 0");
    }
    if (kind == ShapeKind::PlaneGrid && !(spacing > 0.0)) throw Error(ErrorKind::BadSpec, "grid spacing must be > 0");
    if (kind == ShapeKind::TwoSpheres && !(gap > 0.0)) throw Error(ErrorKind::BadSpec, "gap must be > 0");
  }

  /// Inside/outside oracle in the shape's own coordinates.
  std::function<bool(const Vec3&)> classifier() const {
    switch (kind) {
      case ShapeKind::Sphere:
        return [](const Vec3& p) { return squared_norm(p) < 1.0; };
      case ShapeKind::Torus: {
        const double R = major_radius, r = minor_radius;
        return [R, r](const Vec3& p) {
          const double rho = std::hypot(p.x, p.y) - R;
          return rho * rho + p.z * p.z < r * r;
        };
      }
      case ShapeKind::TwoSpheres: {
        const Vec3 c{1.0 + 0.5 * gap, 0.0, 0.0};
        return [c](const Vec3& p) { return squared_norm(p - c) < 1.0 || squared_norm(p + c) < 1.0; };
      }
      case ShapeKind::PlaneGrid:
        return [](const Vec3& p) { return p.z < 0.0; };
    }
    return {};
  }
};

struct GeneratedShape {
  PointCloud cloud;
  std::vector<Vec3> normals;
};

namespace detail {

/// Rotation matrix rows from a uniformly random unit quaternion.
inline std::array<Vec3, 3> random_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double tau = 2.0 * std::numbers::pi;
  const double w = a * std::sin(tau * u2), x = a * std::cos(tau * u2);
  const double y = b * std::sin(tau * u3), z = b * std::cos(tau * u3);
  return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
          Vec3{2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
          Vec3{2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
}

inline Vec3 rotate(const std::array<Vec3, 3>& m, const Vec3& p) { return {dot(m[0], p), dot(m[1], p), dot(m[2], p)}; }

/// Fibonacci lattice on the unit sphere (equal-area rows, golden-angle
/// azimuths), randomly rotated.
inline std::vector<Vec3> fibonacci_sphere(std::size_t n, Rng& rng) {
  const auto rot = random_rotation(rng);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(n);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    Vec3 p = rotate(rot, Vec3{rho * std::cos(phi), rho * std::sin(phi), z});
    pts[k] = p / norm(p);
  }
  return pts;
}

}  // namespace detail

/// Analytic test shapes with exact outward normals.
inline GeneratedShape generate_shape(const ShapeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Vec3> pts, nrm;
  switch (spec.kind) {
    case ShapeKind::Sphere: {
      pts = detail::fibonacci_sphere(spec.count, rng);
      nrm = pts;
      break;
    }
    case ShapeKind::Torus: {
      // Stratified equal-area rings: ring k at tube angle phi_k holds a share of
      // the points proportional to its circumference R + r cos(phi_k), with a
      // random phase per ring. Density is uniform in surface area.
      const double R = spec.major_radius, r = spec.minor_radius;
      const double tau = 2.0 * std::numbers::pi;
      const double spacing = std::sqrt(tau * tau * R * r / static_cast<double>(spec.count));
      const auto rings = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(tau * r / spacing)));
      const double ring_phase = rng.uniform(0.0, tau / static_cast<double>(rings));
      std::vector<double> phis(rings), share(rings);
      double total = 0.0;
      for (std::size_t k = 0; k < rings; ++k) {
        phis[k] = ring_phase + tau * static_cast<double>(k) / static_cast<double>(rings);
        share[k] = R + r * std::cos(phis[k]);
        total += share[k];
      }
      // Largest-remainder rounding so the counts sum to exactly spec.count.
      std::vector<std::size_t> counts(rings);
      std::vector<std::pair<double, std::size_t>> remainders(rings);
      std::size_t assigned = 0;
      for (std::size_t k = 0; k < rings; ++k) {
        const double exact = static_cast<double>(spec.count) * share[k] / total;
        counts[k] = static_cast<std::size_t>(exact);
        assigned += counts[k];
        remainders[k] = {exact - static_cast<double>(counts[k]), k};
      }
      std::sort(remainders.begin(), remainders.end(),
                [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
      for (std::size_t k = 0; assigned < spec.count; ++k, ++assigned) ++counts[remainders[k % rings].second];
      for (std::size_t k = 0; k < rings; ++k) {
        const double phi = phis[k];
        const double offset = rng.uniform(0.0, tau);
        for (std::size_t t = 0; t < counts[k]; ++t) {
          const double theta = offset + tau * static_cast<double>(t) / static_cast<double>(counts[k]);
          const Vec3 n{std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
          pts.push_back(Vec3{R * std::cos(theta), R * std::sin(theta), 0.0} + n * r);
          nrm.push_back(n);
        }
      }
      break;
    }
    case ShapeKind::PlaneGrid: {
      const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.count))));
      const std::size_t rows = (spec.count + cols - 1) / cols;
      const double ox = -0.5 * spec.spacing * static_cast<double>(cols - 1);
      const double oy = -0.5 * spec.spacing * static_cast<double>(rows - 1);
      for (std::size_t k = 0; k < spec.count; ++k) {
        pts.push_back({ox + spec.spacing * static_cast<double>(k % cols),
                       oy + spec.spacing * static_cast<double>(k / cols), 0.0});
        nrm.push_back({0.0, 0.0, 1.0});
      }
      break;
    }
    case ShapeKind::TwoSpheres: {
      const Vec3 c{1.0 + 0.5 * spec.gap, 0.0, 0.0};
      const std::size_t first = spec.count / 2;
      const auto a = detail::fibonacci_sphere(first, rng);
      const auto b = detail::fibonacci_sphere(spec.count - first, rng);
      for (const auto& p : a) {
        pts.push_back(p - c);
        nrm.push_back(p);
      }
      for (const auto& p : b) {
        pts.push_back(p + c);
        nrm.push_back(p);
      }
      break;
    }
  }
  return {PointCloud(std::move(pts)), std::move(nrm)};
}

/// Symmetric point-set Chamfer distance: half the sum of the two mean
/// squared nearest-neighbor distances.
inline double chamfer_points(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "chamfer_points needs nonempty sets");
  auto one_way = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    const KdTree tree(to);
    std::vector<double> d2(from.size());
    parallel_for(from.size(), [&](std::size_t i) { d2[i] = tree.nearest(from[i]).dist2; });
    double sum = 0.0;
    for (double v : d2) sum += v;
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

struct InsideOutCounts {
  std::size_t inside_out = 0;  // p+ inside or p- outside
  std::size_t same_side = 0;   // both probes on one side
};

inline InsideOutCounts inside_out_count(std::span<const SamplePair> samples,
                                        const std::function<bool(const Vec3&)>& inside) {
  InsideOutCounts c;
  for (const auto& s : samples) {
    const bool plus_in = inside(s.plus);
    const bool minus_in = inside(s.minus);
    if (plus_in || !minus_in) ++c.inside_out;
    if (plus_in == minus_in) ++c.same_side;
  }
  return c;
}

}  // namespace windnorm
