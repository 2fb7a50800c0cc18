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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windnorm/core.hpp"
#include "windnorm/kdtree.hpp"
#include "windnorm/parallel.hpp"

namespace windnorm {

/// Source-query pairs closer than this are skipped.
inline constexpr double kSingularRadius = 1e-10;
inline constexpr double kInvFourPi = 0.25 * std::numbers::inv_pi;

struct GwnDiagnostics {
  std::size_t skipped_pairs = 0;
  std::size_t degenerate_neighborhoods = 0;
};

/// Dipole term of one oriented sample at q: <n, p - q> / (4 pi |p - q|^3).
inline double poisson_kernel(const Vec3& q, const Vec3& p, const Vec3& n) {
  const Vec3 d = p - q;
  const double r = norm(d);
  if (r < kSingularRadius) throw Error(ErrorKind::SingularPair, "query coincides with source");
  return kInvFourPi * dot(n, d) / (r * r * r);
}

/// Gradient of poisson_kernel with respect to the query point q.
inline Vec3 kernel_gradient(const Vec3& q, const Vec3& p, const Vec3& n) {
  const Vec3 d = p - q;
  const double r = norm(d);
  if (r < kSingularRadius) throw Error(ErrorKind::SingularPair, "query coincides with source");
  const double r2 = r * r;
  const double inv_r3 = 1.0 / (r2 * r);
  const double inv_r5 = inv_r3 / r2;
  return kInvFourPi * (-n * inv_r3 + d * (3.0 * dot(n, d) * inv_r5));
}

/// Point dipoles in structure-of-arrays layout. The moment of source j is
/// a_j n_j for the winding number; the energy gradient reuses the same sums
/// with other per-source moments.
class DipoleSet {
 public:
  DipoleSet() = default;
  DipoleSet(std::span<const Vec3> positions, std::span<const Vec3> moments) { assign(positions, moments); }

  void assign(std::span<const Vec3> positions, std::span<const Vec3> moments) {
    const std::size_t n = positions.size();
    px_.resize(n), py_.resize(n), pz_.resize(n);
    mx_.resize(n), my_.resize(n), mz_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      px_[j] = positions[j].x, py_[j] = positions[j].y, pz_[j] = positions[j].z;
      mx_[j] = moments[j].x, my_[j] = moments[j].y, mz_[j] = moments[j].z;
    }
  }

  std::size_t size() const noexcept { return px_.size(); }

  /// Sum over sources j != exclude, in index order.
  double value(const Vec3& q, std::optional<std::size_t> exclude = std::nullopt,
               std::size_t* skipped = nullptr) const {
    double sum = 0.0;
    std::size_t skips = 0;
    const std::size_t n = size();
    const std::size_t ex = exclude.value_or(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = px_[j] - q.x, dy = py_[j] - q.y, dz = pz_[j] - q.z;
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (j == ex) continue;
      if (r2 < kSingularRadius * kSingularRadius) {
        ++skips;
        continue;
      }
      const double r = std::sqrt(r2);
      sum += (mx_[j] * dx + my_[j] * dy + mz_[j] * dz) / (r2 * r);
    }
    if (skipped) *skipped += skips;
    return kInvFourPi * sum;
  }

  Vec3 gradient(const Vec3& q, std::optional<std::size_t> exclude = std::nullopt,
                std::size_t* skipped = nullptr) const {
    double gx = 0.0, gy = 0.0, gz = 0.0;
    std::size_t skips = 0;
    const std::size_t n = size();
    const std::size_t ex = exclude.value_or(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = px_[j] - q.x, dy = py_[j] - q.y, dz = pz_[j] - q.z;
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (j == ex) continue;
      if (r2 < kSingularRadius * kSingularRadius) {
        ++skips;
        continue;
      }
      const double inv_r2 = 1.0 / r2;
      const double inv_r3 = inv_r2 / std::sqrt(r2);
      const double s = 3.0 * (mx_[j] * dx + my_[j] * dy + mz_[j] * dz) * inv_r2;
      gx += (s * dx - mx_[j]) * inv_r3;
      gy += (s * dy - my_[j]) * inv_r3;
      gz += (s * dz - mz_[j]) * inv_r3;
    }
    if (skipped) *skipped += skips;
    return Vec3{gx, gy, gz} * kInvFourPi;
  }

 private:
  std::vector<double> px_, py_, pz_, mx_, my_, mz_;
};

inline std::vector<Vec3> area_weighted_moments(const PointCloud& cloud, std::span<const Vec3> normals) {
  if (!cloud.has_areas()) throw Error(ErrorKind::InvalidArgument, "cloud areas have not been estimated");
  if (normals.size() != cloud.size()) throw Error(ErrorKind::LengthMismatch, "normals and points differ in length");
  std::vector<Vec3> m(cloud.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = normals[j] * cloud.areas()[j];
  return m;
}

/// Discrete generalized winding number at q.
inline double winding_number(const PointCloud& cloud, std::span<const Vec3> normals, const Vec3& q,
                             std::optional<std::size_t> exclude = std::nullopt,
                             GwnDiagnostics* diag = nullptr) {
  const DipoleSet set(cloud.points(), area_weighted_moments(cloud, normals));
  std::size_t skipped = 0;
  const double w = set.value(q, exclude, &skipped);
  if (diag) diag->skipped_pairs += skipped;
  return w;
}

/// Spatial gradient of the winding number at q; source j weighted by a_j.
inline Vec3 winding_gradient(const PointCloud& cloud, std::span<const Vec3> normals, const Vec3& q,
                             std::optional<std::size_t> exclude = std::nullopt,
                             GwnDiagnostics* diag = nullptr) {
  const DipoleSet set(cloud.points(), area_weighted_moments(cloud, normals));
  std::size_t skipped = 0;
  const Vec3 g = set.gradient(q, exclude, &skipped);
  if (diag) diag->skipped_pairs += skipped;
  return g;
}

/// Winding numbers at many query points (parallel over queries).
inline std::vector<double> winding_numbers(const PointCloud& cloud, std::span<const Vec3> normals,
                                           std::span<const Vec3> queries, GwnDiagnostics* diag = nullptr) {
  const DipoleSet set(cloud.points(), area_weighted_moments(cloud, normals));
  std::vector<double> out(queries.size());
  std::vector<std::size_t> skips(queries.size(), 0);
  parallel_for(queries.size(), [&](std::size_t k) { out[k] = set.value(queries[k], std::nullopt, &skips[k]); });
  if (diag) {
    for (auto s : skips) diag->skipped_pairs += s;
  }
  return out;
}

namespace detail {

inline double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const auto& p = poly[k];
    const auto& q = poly[(k + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

/// Keeps the part of `poly` with <x, dir> <= offset.
inline std::vector<Eigen::Vector2d> clip_half_plane(const std::vector<Eigen::Vector2d>& poly,
                                                    const Eigen::Vector2d& dir, double offset) {
  std::vector<Eigen::Vector2d> out;
  const std::size_t m = poly.size();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& a = poly[k];
    const auto& b = poly[(k + 1) % m];
    const double sa = a.dot(dir) - offset;
    const double sb = b.dot(dir) - offset;
    if (sa <= 0.0) out.push_back(a);
    if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0)) out.push_back(a + (b - a) * (sa / (sa - sb)));
  }
  return out;
}

}  // namespace detail

/// Per-point area weights: fit a tangent plane to p_i and its k nearest
/// neighbors, project, and take the area of p_i's 2D Voronoi cell clipped to
/// the neighbors' bounding square enlarged 1.5x.
inline std::vector<double> estimate_areas(const PointCloud& cloud, std::size_t k = 15,
                                          GwnDiagnostics* diag = nullptr) {
  const std::size_t n = cloud.size();
  if (k < 3 || n <= k) {
    throw Error(ErrorKind::InvalidArgument, "estimate_areas needs n > k >= 3 (n=" + std::to_string(n) +
                                                ", k=" + std::to_string(k) + ")");
  }
  const KdTree tree(cloud.points());
  std::vector<double> areas(n, 0.0);
  std::vector<char> degenerate(n, 0);

  parallel_for(n, [&](std::size_t i) {
    const Vec3 p = cloud[i];
    const auto nbrs = tree.knn(p, k, i);

    Eigen::Vector3d centroid(p.x, p.y, p.z);
    for (const auto& nb : nbrs) centroid += Eigen::Vector3d(cloud[nb.index].x, cloud[nb.index].y, cloud[nb.index].z);
    centroid /= static_cast<double>(nbrs.size() + 1);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto accumulate = [&](const Vec3& x) {
      const Eigen::Vector3d d = Eigen::Vector3d(x.x, x.y, x.z) - centroid;
      cov += d * d.transpose();
    };
    accumulate(p);
    for (const auto& nb : nbrs) accumulate(cloud[nb.index]);

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
    if (!(lambda(1) > 1e-12 * lambda(2))) {
      double mean = 0.0;
      for (const auto& nb : nbrs) mean += std::sqrt(nb.dist2);
      mean /= static_cast<double>(nbrs.size());
      areas[i] = mean * mean;
      degenerate[i] = 1;
      return;
    }
    const Eigen::Vector3d e1 = eig.eigenvectors().col(2);
    const Eigen::Vector3d e2 = eig.eigenvectors().col(1);

    std::vector<Eigen::Vector2d> proj;
    proj.reserve(nbrs.size());
    for (const auto& nb : nbrs) {
      const Vec3 d = cloud[nb.index] - p;
      const Eigen::Vector3d dv(d.x, d.y, d.z);
      proj.emplace_back(dv.dot(e1), dv.dot(e2));
    }
    Eigen::Vector2d lo(0.0, 0.0), hi(0.0, 0.0);  // p_i itself projects to the origin
    for (const auto& q : proj) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    const Eigen::Vector2d c = 0.5 * (lo + hi);
    const double half = 1.5 * 0.5 * (hi - lo).maxCoeff();
    std::vector<Eigen::Vector2d> poly = {c + Eigen::Vector2d(-half, -half), c + Eigen::Vector2d(half, -half),
                                         c + Eigen::Vector2d(half, half), c + Eigen::Vector2d(-half, half)};
    for (const auto& q : proj) {
      const double len2 = q.squaredNorm();
      if (len2 <= 0.0) continue;  // neighbor projects onto p_i
      poly = detail::clip_half_plane(poly, q, 0.5 * len2);
      if (poly.size() < 3) break;
    }
    const double a = poly.size() >= 3 ? detail::polygon_area(poly) : 0.0;
    if (a > 0.0) {
      areas[i] = a;
    } else {
      double mean = 0.0;
      for (const auto& nb : nbrs) mean += std::sqrt(nb.dist2);
      mean /= static_cast<double>(nbrs.size());
      areas[i] = mean * mean;
      degenerate[i] = 1;
    }
  });
  if (diag) {
    for (char d : degenerate) diag->degenerate_neighborhoods += static_cast<std::size_t>(d);
  }
  return areas;
}

}  // namespace windnorm
