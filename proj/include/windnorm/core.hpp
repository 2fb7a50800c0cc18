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
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace windnorm {

enum class ErrorKind {
  InvalidArgument,
  DegenerateCloud,
  DuplicatePoints,
  NumericalFailure,
  EmptyCell,
  SingularPair,
  StaleCache,
  NonFiniteEnergy,
  LengthMismatch,
  BadSpec,
  Parse,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateCloud: return "DegenerateCloud";
    case ErrorKind::DuplicatePoints: return "DuplicatePoints";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::SingularPair: return "SingularPair";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::NonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double squared_norm(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }
constexpr Vec3 cwise_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
constexpr Vec3 cwise_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

struct BBox {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  void extend(const Vec3& p) {
    min = cwise_min(min, p);
    max = cwise_max(max, p);
  }
  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return norm(extent()); }
  bool contains(const Vec3& p, double tol = 0.0) const {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < min[a] - tol || p[a] > max[a] + tol) return false;
    }
    return true;
  }
  /// Box scaled by `factor` about its center.
  BBox scaled(double factor) const {
    BBox out;
    const Vec3 c = center();
    const Vec3 half = extent() * (0.5 * factor);
    out.min = c - half;
    out.max = c + half;
    return out;
  }
};

inline BBox bounding_box(std::span<const Vec3> points) {
  BBox box;
  for (const auto& p : points) box.extend(p);
  return box;
}

/// Discrete surface sample: positions plus per-point area weights.
///
/// Areas start empty and are filled by `estimate_areas` (or set directly by
/// callers that know them, e.g. analytic shapes).
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points, std::vector<double> areas = {})
      : points_(std::move(points)), areas_(std::move(areas)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].finite()) {
        throw Error(ErrorKind::InvalidArgument, "non-finite coordinate at point " + std::to_string(i));
      }
    }
    if (!areas_.empty() && areas_.size() != points_.size()) {
      throw Error(ErrorKind::LengthMismatch, "areas and points differ in length");
    }
    bbox_ = bounding_box(points_);
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::span<const Vec3> points() const noexcept { return points_; }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> areas() const noexcept { return areas_; }
  bool has_areas() const noexcept { return !areas_.empty(); }
  const BBox& bbox() const noexcept { return bbox_; }

  void set_areas(std::vector<double> areas) {
    if (areas.size() != points_.size()) {
      throw Error(ErrorKind::LengthMismatch, "areas and points differ in length");
    }
    areas_ = std::move(areas);
  }

 private:
  std::vector<Vec3> points_;
  std::vector<double> areas_;
  BBox bbox_;
};

/// Uniform scale plus translation: normalized = (original - center) * scale.
struct Transform {
  Vec3 center;
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
  Vec3 inverse(const Vec3& p) const { return p / scale + center; }
};

/// Centers the tight bounding box at the origin and scales uniformly so the
/// largest half-extent is 1.
inline std::pair<PointCloud, Transform> normalize_cloud(const PointCloud& cloud) {
  if (cloud.size() < 4) {
    throw Error(ErrorKind::DegenerateCloud, "need at least 4 points, got " + std::to_string(cloud.size()));
  }
  const BBox& box = cloud.bbox();
  const Vec3 ext = box.extent();
  const double half = 0.5 * std::max({ext.x, ext.y, ext.z});
  if (!(half > 0.0)) throw Error(ErrorKind::DegenerateCloud, "all points coincide");

  Transform tf{box.center(), 1.0 / half};
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) out.push_back(tf.apply(p));
  std::vector<double> areas;
  if (cloud.has_areas()) {
    const double s2 = tf.scale * tf.scale;
    for (double a : cloud.areas()) areas.push_back(a * s2);
  }
  return {PointCloud(std::move(out), std::move(areas)), tf};
}

struct SphericalAngles {
  double u = 0.0;  // azimuth
  double v = 0.0;  // polar angle from +z
};

inline Vec3 angles_to_normal(double u, double v) {
  const double sv = std::sin(v);
  return {std::cos(u) * sv, std::sin(u) * sv, std::cos(v)};
}

inline SphericalAngles normal_to_angles(const Vec3& n) {
  const Vec3 m = normalized(n);
  return {std::atan2(m.y, m.x), std::acos(std::clamp(m.z, -1.0, 1.0))};
}

struct NormalJacobian {
  Vec3 dn_du;
  Vec3 dn_dv;
};

inline NormalJacobian normal_jacobian(double u, double v) {
  const double su = std::sin(u), cu = std::cos(u);
  const double sv = std::sin(v), cv = std::cos(v);
  return {{-su * sv, cu * sv, 0.0}, {cu * cv, su * cv, -sv}};
}

/// Per-point unit normals stored in the (u, v) spherical chart.
class NormalField {
 public:
  NormalField() = default;
  explicit NormalField(std::vector<SphericalAngles> angles) : angles_(std::move(angles)) {}

  static NormalField from_normals(std::span<const Vec3> normals) {
    std::vector<SphericalAngles> angles;
    angles.reserve(normals.size());
    for (const auto& n : normals) angles.push_back(normal_to_angles(n));
    return NormalField(std::move(angles));
  }

  std::size_t size() const noexcept { return angles_.size(); }
  std::span<const SphericalAngles> angles() const noexcept { return angles_; }
  SphericalAngles& operator[](std::size_t i) { return angles_[i]; }
  const SphericalAngles& operator[](std::size_t i) const { return angles_[i]; }

  Vec3 normal(std::size_t i) const { return angles_to_normal(angles_[i].u, angles_[i].v); }
  std::vector<Vec3> normals() const {
    std::vector<Vec3> out(angles_.size());
    for (std::size_t i = 0; i < angles_.size(); ++i) out[i] = normal(i);
    return out;
  }

  /// Flattened variable vector (u_0..u_{n-1}, v_0..v_{n-1}).
  std::vector<double> to_variables() const {
    const std::size_t n = angles_.size();
    std::vector<double> x(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = angles_[i].u;
      x[n + i] = angles_[i].v;
    }
    return x;
  }
  static NormalField from_variables(std::span<const double> x) {
    const std::size_t n = x.size() / 2;
    std::vector<SphericalAngles> angles(n);
    for (std::size_t i = 0; i < n; ++i) angles[i] = {x[i], x[n + i]};
    return NormalField(std::move(angles));
  }

 private:
  std::vector<SphericalAngles> angles_;
};

struct RngSeed {
  std::uint64_t value = 0;
};

/// splitmix64; fixed algorithm so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(RngSeed seed) : state_(seed.value) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per call; the pair's sibling is dropped).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  Vec3 on_sphere() {
    const double u = uniform(0.0, 2.0 * std::numbers::pi);
    const double v = std::acos(1.0 - 2.0 * uniform());
    return angles_to_normal(u, v);
  }

 private:
  std::uint64_t state_;
};

/// i.i.d. normals uniform on the sphere (u uniform, cos v uniform).
inline NormalField init_random_normals(std::size_t n, RngSeed seed) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "init_random_normals needs n >= 1");
  Rng rng(seed);
  std::vector<SphericalAngles> angles(n);
  for (auto& a : angles) {
    a.u = rng.uniform(0.0, 2.0 * std::numbers::pi);
    a.v = std::acos(1.0 - 2.0 * rng.uniform());
  }
  return NormalField(std::move(angles));
}

}  // namespace windnorm
