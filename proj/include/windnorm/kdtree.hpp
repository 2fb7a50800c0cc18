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
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "windnorm/core.hpp"

namespace windnorm {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = 0.0;

  // (distance, index) order; ties resolve to the lower index, same as a
  // stable exhaustive scan.
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

/// Static 3D kd-tree. Query results are identical to exhaustive search under
/// the (distance, index) order.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) build(0, points_.size());
  }

  std::size_t size() const noexcept { return points_.size(); }

  /// The k nearest points to q, sorted ascending; `exclude` is skipped.
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k,
                            std::optional<std::size_t> exclude = std::nullopt) const {
    std::priority_queue<Neighbor> heap;  // max-heap on (dist2, index)
    if (k > 0 && !nodes_.empty()) search(0, q, k, exclude, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

  Neighbor nearest(const Vec3& q, std::optional<std::size_t> exclude = std::nullopt) const {
    auto r = knn(q, 1, exclude);
    if (r.empty()) return {std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    return r.front();
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    int axis = -1;                   // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    BBox box;
    for (std::size_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    const Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const Vec3& q, std::size_t k, std::optional<std::size_t> exclude,
              std::priority_queue<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (exclude && *exclude == idx) continue;
        const Neighbor cand{idx, squared_norm(points_[idx] - q)};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, exclude, heap);
    // Points equal to the split value may sit on either side, so only prune
    // strictly beyond the current worst distance.
    if (heap.size() < k || diff * diff <= heap.top().dist2) search(far, q, k, exclude, heap);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Reference exhaustive k-nearest search, same ordering as KdTree::knn.
inline std::vector<Neighbor> knn_exhaustive(std::span<const Vec3> points, const Vec3& q, std::size_t k,
                                            std::optional<std::size_t> exclude = std::nullopt) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, squared_norm(points[i] - q)});
  }
  const std::size_t m = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
  all.resize(m);
  return all;
}

}  // namespace windnorm
