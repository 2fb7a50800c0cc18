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
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "windnorm/core.hpp"
#include "windnorm/kdtree.hpp"
#include "windnorm/parallel.hpp"

namespace windnorm {

struct Plane {
  Vec3 normal;  // unit
  double offset = 0.0;

  /// Positive outside, negative inside.
  double signed_distance(const Vec3& p) const { return dot(normal, p) - offset; }
};

/// Convex polytope kept as a list of planar polygonal faces. Faces carry the
/// tag of the plane that produced them: box faces are negative, bisector
/// faces carry the neighbor seed index.
class ConvexCell {
 public:
  struct Face {
    Plane plane;
    long tag = 0;
    std::vector<Vec3> vertices;  // ordered around the face
  };

  static ConvexCell box(const BBox& b) {
    ConvexCell cell;
    const Vec3& lo = b.min;
    const Vec3& hi = b.max;
    auto corner = [&](int i) { return Vec3{(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z}; };
    // Each box face as a quad of corner indices in cyclic order.
    const int quads[6][4] = {{0, 2, 6, 4}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 5, 7, 6}};
    const Plane planes[6] = {{{-1, 0, 0}, -lo.x}, {{1, 0, 0}, hi.x}, {{0, -1, 0}, -lo.y},
                             {{0, 1, 0}, hi.y},   {{0, 0, -1}, -lo.z}, {{0, 0, 1}, hi.z}};
    for (int f = 0; f < 6; ++f) {
      Face face{planes[f], -(f + 1), {}};
      for (int k = 0; k < 4; ++k) face.vertices.push_back(corner(quads[f][k]));
      cell.faces_.push_back(std::move(face));
    }
    return cell;
  }

  const std::vector<Face>& faces() const noexcept { return faces_; }
  bool empty() const noexcept { return faces_.empty(); }

  /// Keeps the part of the cell with plane.signed_distance <= 0. Returns false
  /// when the plane does not cut the cell.
  bool clip(const Plane& plane, long tag, double eps) {
    bool any_outside = false;
    for (const auto& f : faces_) {
      for (const auto& v : f.vertices) {
        if (plane.signed_distance(v) > eps) {
          any_outside = true;
          break;
        }
      }
      if (any_outside) break;
    }
    if (!any_outside) return false;

    std::vector<Face> kept;
    std::vector<Vec3> cap;
    for (auto& f : faces_) {
      std::vector<Vec3> out;
      const std::size_t m = f.vertices.size();
      for (std::size_t k = 0; k < m; ++k) {
        const Vec3& a = f.vertices[k];
        const Vec3& b = f.vertices[(k + 1) % m];
        const double sa = plane.signed_distance(a);
        const double sb = plane.signed_distance(b);
        if (sa <= eps) {
          out.push_back(a);
          if (sa >= -eps) cap.push_back(a);
        }
        if ((sa < -eps && sb > eps) || (sa > eps && sb < -eps)) {
          const Vec3 p = edge_intersection(plane, a, b);
          out.push_back(p);
          cap.push_back(p);
        }
      }
      dedupe_cyclic(out, eps);
      if (out.size() >= 3) kept.push_back({f.plane, f.tag, std::move(out)});
    }
    dedupe(cap, eps);
    if (cap.size() >= 3) kept.push_back({plane, tag, order_on_plane(cap, plane.normal)});
    faces_ = std::move(kept);
    return true;
  }

  /// Distinct vertices (merged within `merge_tol`), in first-seen face order.
  std::vector<Vec3> vertices(double merge_tol) const {
    std::vector<Vec3> out;
    for (const auto& f : faces_) {
      for (const auto& v : f.vertices) {
        bool seen = false;
        for (const auto& w : out) {
          if (squared_norm(v - w) <= merge_tol * merge_tol) {
            seen = true;
            break;
          }
        }
        if (!seen) out.push_back(v);
      }
    }
    return out;
  }

  double max_distance_from(const Vec3& p) const {
    double r2 = 0.0;
    for (const auto& f : faces_) {
      for (const auto& v : f.vertices) r2 = std::max(r2, squared_norm(v - p));
    }
    return std::sqrt(r2);
  }

 private:
  // Endpoints are put in a canonical order so that the two faces sharing an
  // edge produce bit-identical intersection points.
  static Vec3 edge_intersection(const Plane& plane, Vec3 a, Vec3 b) {
    if (std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z)) std::swap(a, b);
    const double sa = plane.signed_distance(a);
    const double sb = plane.signed_distance(b);
    const double t = sa / (sa - sb);
    return a + (b - a) * t;
  }

  static void dedupe(std::vector<Vec3>& pts, double tol) {
    std::vector<Vec3> out;
    for (const auto& p : pts) {
      bool seen = false;
      for (const auto& q : out) {
        if (squared_norm(p - q) <= tol * tol) {
          seen = true;
          break;
        }
      }
      if (!seen) out.push_back(p);
    }
    pts = std::move(out);
  }

  static void dedupe_cyclic(std::vector<Vec3>& pts, double tol) {
    std::vector<Vec3> out;
    for (const auto& p : pts) {
      if (!out.empty() && squared_norm(p - out.back()) <= tol * tol) continue;
      out.push_back(p);
    }
    while (out.size() > 1 && squared_norm(out.front() - out.back()) <= tol * tol) out.pop_back();
    pts = std::move(out);
  }

  static std::vector<Vec3> order_on_plane(std::vector<Vec3> pts, const Vec3& normal) {
    Vec3 c;
    for (const auto& p : pts) c += p;
    c = c / static_cast<double>(pts.size());
    const Vec3 helper = std::abs(normal.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1 = normalized(cross(normal, helper));
    const Vec3 e2 = cross(normal, e1);
    std::vector<std::pair<double, Vec3>> keyed;
    keyed.reserve(pts.size());
    for (const auto& p : pts) keyed.emplace_back(std::atan2(dot(p - c, e2), dot(p - c, e1)), p);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = keyed[i].second;
    return pts;
  }

  std::vector<Face> faces_;
};

struct VoronoiCell {
  std::vector<Vec3> candidates;
  std::vector<bool> on_clip_box;
  std::vector<Plane> planes;  // bounding half-spaces, for membership tests

  bool contains(const Vec3& q, double tol = 0.0) const {
    for (const auto& pl : planes) {
      if (pl.signed_distance(q) > tol) return false;
    }
    return true;
  }
};

/// Clipped 3D Voronoi diagram with per-seed candidate vertex lists.
struct VoronoiDiagram {
  std::vector<Vec3> seeds;
  std::vector<VoronoiCell> cells;
  BBox clip_box;

  std::size_t size() const noexcept { return cells.size(); }
};

inline constexpr double kVertexMergeTol = 1e-9;
inline constexpr double kAuditTol = 1e-9;

/// Clip box: tight bbox scaled by `box_scale` about its center. An axis with
/// no extent (planar input) borrows the largest half-extent so cells stay
/// bounded in every direction.
inline BBox enlarged_clip_box(const BBox& tight, double box_scale) {
  const Vec3 c = tight.center();
  Vec3 half = tight.extent() * 0.5;
  const double largest = std::max({half.x, half.y, half.z});
  for (int a = 0; a < 3; ++a) {
    if (half[a] <= 1e-9 * largest) half[a] = largest;
  }
  BBox out;
  out.min = c - half * box_scale;
  out.max = c + half * box_scale;
  return out;
}

/// Builds each cell by clipping the clip box with bisector planes of the
/// seed's neighbors in ascending distance, stopping once the next neighbor is
/// farther than twice the cell radius (its bisector cannot reach the cell).
inline VoronoiDiagram build_diagram(const PointCloud& cloud, double box_scale = 2.0, std::size_t min_points = 4) {
  if (!(box_scale > 1.0)) throw Error(ErrorKind::InvalidArgument, "box_scale must exceed 1");
  const std::size_t n = cloud.size();
  if (n < min_points) {
    throw Error(ErrorKind::DuplicatePoints, "need at least " + std::to_string(min_points) + " distinct points");
  }

  VoronoiDiagram diagram;
  diagram.seeds.assign(cloud.points().begin(), cloud.points().end());
  diagram.clip_box = enlarged_clip_box(cloud.bbox(), box_scale);
  diagram.cells.resize(n);

  const KdTree tree(cloud.points());
  for (std::size_t i = 0; i < n; ++i) {
    const auto nn = tree.nearest(cloud[i], i);
    if (nn.dist2 <= 1e-24) {
      throw Error(ErrorKind::DuplicatePoints,
                  "points " + std::to_string(i) + " and " + std::to_string(nn.index) + " coincide");
    }
  }

  const double scale = diagram.clip_box.diagonal();
  const double eps = 1e-13 * scale;

  parallel_for(n, [&](std::size_t i) {
    const Vec3 seed = cloud[i];
    ConvexCell cell = ConvexCell::box(diagram.clip_box);
    double radius = cell.max_distance_from(seed);
    std::size_t k = std::min<std::size_t>(32, n - 1);
    std::size_t processed = 0;
    bool done = false;
    while (!done) {
      const auto neighbors = tree.knn(seed, k, i);
      for (std::size_t r = processed; r < neighbors.size(); ++r) {
        const auto& nb = neighbors[r];
        if (std::sqrt(nb.dist2) > 2.0 * radius) {
          done = true;
          break;
        }
        const Vec3 other = cloud[nb.index];
        const Vec3 dir = normalized(other - seed);
        const Plane bisector{dir, dot(dir, (seed + other) * 0.5)};
        if (cell.clip(bisector, static_cast<long>(nb.index), eps)) radius = cell.max_distance_from(seed);
      }
      processed = neighbors.size();
      if (done || k >= n - 1) break;
      k = std::min(n - 1, 2 * k);
    }
    if (cell.empty()) throw Error(ErrorKind::NumericalFailure, "cell " + std::to_string(i) + " vanished");

    VoronoiCell& out = diagram.cells[i];
    out.candidates = cell.vertices(kVertexMergeTol);
    for (const auto& f : cell.faces()) out.planes.push_back(f.plane);
    const BBox& cb = diagram.clip_box;
    for (const auto& v : out.candidates) {
      bool on_box = false;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(v[a] - cb.min[a]) <= kVertexMergeTol * scale ||
            std::abs(v[a] - cb.max[a]) <= kVertexMergeTol * scale) {
          on_box = true;
        }
      }
      out.on_clip_box.push_back(on_box);
    }
    if (out.candidates.size() < 4) {
      throw Error(ErrorKind::NumericalFailure, "cell " + std::to_string(i) + " has fewer than 4 vertices");
    }
    // Equidistance audit: no other seed may be strictly closer to a vertex.
    for (const auto& v : out.candidates) {
      const double own = distance(v, seed);
      const double best = std::sqrt(tree.nearest(v).dist2);
      if (own - best > kAuditTol) {
        throw Error(ErrorKind::NumericalFailure, "cell " + std::to_string(i) + " failed the equidistance audit");
      }
    }
  });
  return diagram;
}

/// p_i+ / p_i- for one point: candidate indices with the smallest and the
/// largest angle between (q - p_i) and the normal.
struct SamplePair {
  Vec3 plus;
  Vec3 minus;
  std::size_t plus_index = 0;
  std::size_t minus_index = 0;

  bool operator==(const SamplePair&) const = default;
};

inline SamplePair select_samples(const VoronoiDiagram& diagram, std::size_t i, const Vec3& normal) {
  const Vec3& seed = diagram.seeds[i];
  const auto& cands = diagram.cells[i].candidates;
  double best_cos = -std::numeric_limits<double>::infinity();
  double worst_cos = std::numeric_limits<double>::infinity();
  std::size_t plus = cands.size(), minus = cands.size();
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const Vec3 d = cands[k] - seed;
    const double len = norm(d);
    if (len < 1e-12) continue;
    const double c = dot(d, normal) / len;
    if (c > best_cos) {
      best_cos = c;
      plus = k;
    }
    if (c < worst_cos) {
      worst_cos = c;
      minus = k;
    }
  }
  if (plus == cands.size() || plus == minus) {
    throw Error(ErrorKind::EmptyCell, "cell " + std::to_string(i) + " has no usable candidates");
  }
  return {cands[plus], cands[minus], plus, minus};
}

inline std::vector<SamplePair> select_all_samples(const VoronoiDiagram& diagram, std::span<const Vec3> normals) {
  std::vector<SamplePair> out(diagram.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = select_samples(diagram, i, normals[i]);
  return out;
}

/// Debug dump: one row per candidate.
inline void write_candidates_csv(std::ostream& os, const VoronoiDiagram& diagram) {
  os << "seed_index,x,y,z,on_clip_box\n";
  os.precision(17);
  for (std::size_t i = 0; i < diagram.size(); ++i) {
    const auto& cell = diagram.cells[i];
    for (std::size_t k = 0; k < cell.candidates.size(); ++k) {
      const Vec3& v = cell.candidates[k];
      os << i << ',' << v.x << ',' << v.y << ',' << v.z << ',' << (cell.on_clip_box[k] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace windnorm
