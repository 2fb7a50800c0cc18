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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windnorm/core.hpp"
#include "windnorm/gwn.hpp"
#include "windnorm/parallel.hpp"
#include "windnorm/voronoi.hpp"

namespace windnorm {

inline constexpr double kDefaultDelta = 0.05;

/// Range penalty on the two probe winding numbers:
/// (1 - e^max(w+, 1+delta)) + (1 - e^max(w-, 1+delta)).
inline double penalty_g(double w_plus, double w_minus, double delta = kDefaultDelta) {
  const double cap = 1.0 + delta;
  return (1.0 - std::exp(std::max(w_plus, cap))) + (1.0 - std::exp(std::max(w_minus, cap)));
}

/// d/dw of one penalty summand; zero on the inactive branch (including w = 1+delta).
inline double penalty_g_derivative(double w, double delta = kDefaultDelta) {
  return w > 1.0 + delta ? -std::exp(w) : 0.0;
}

namespace detail {
inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

/// Normals, probe samples, and the winding-number caches the energy reads.
/// Caches are stamped with the revision they were computed for; any mutation
/// bumps the revision and invalidates them until refresh().
class EnergyState {
 public:
  EnergyState(const PointCloud& cloud, NormalField normals, std::vector<SamplePair> samples)
      : cloud_(&cloud), field_(std::move(normals)), samples_(std::move(samples)) {
    if (!cloud.has_areas()) throw Error(ErrorKind::InvalidArgument, "cloud areas have not been estimated");
    if (field_.size() != cloud.size() || samples_.size() != cloud.size()) {
      throw Error(ErrorKind::LengthMismatch, "normals/samples must match the point count");
    }
    normals_ = field_.normals();
  }

  const PointCloud& cloud() const noexcept { return *cloud_; }
  const NormalField& normal_field() const noexcept { return field_; }
  std::span<const Vec3> normals() const noexcept { return normals_; }
  std::span<const SamplePair> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return normals_.size(); }

  void set_normals(NormalField normals) {
    if (normals.size() != size()) throw Error(ErrorKind::LengthMismatch, "normal count changed");
    field_ = std::move(normals);
    normals_ = field_.normals();
    ++revision_;
  }
  void set_samples(std::vector<SamplePair> samples) {
    if (samples.size() != size()) throw Error(ErrorKind::LengthMismatch, "sample count changed");
    samples_ = std::move(samples);
    ++revision_;
  }

  std::uint64_t revision() const noexcept { return revision_; }
  bool fresh() const noexcept { return cache_revision_ == revision_; }

  /// Recomputes w(p_i+), w(p_i-) (all sources) and grad w(p_i) (source i excluded).
  void refresh() {
    const std::size_t n = size();
    dipoles_.assign(cloud_->points(), area_weighted_moments(*cloud_, normals_));
    w_plus_.assign(n, 0.0);
    w_minus_.assign(n, 0.0);
    grad_w_.assign(n, Vec3{});
    std::vector<std::size_t> skips(n, 0);
    parallel_for(n, [&](std::size_t i) {
      w_plus_[i] = dipoles_.value(samples_[i].plus, std::nullopt, &skips[i]);
      w_minus_[i] = dipoles_.value(samples_[i].minus, std::nullopt, &skips[i]);
      grad_w_[i] = dipoles_.gradient((*cloud_)[i], i, &skips[i]);
    });
    skipped_pairs_ = 0;
    for (auto s : skips) skipped_pairs_ += s;
    cache_revision_ = revision_;
  }

  std::span<const double> w_plus() const { return checked(w_plus_); }
  std::span<const double> w_minus() const { return checked(w_minus_); }
  std::span<const Vec3> grad_w() const { return checked(grad_w_); }
  std::size_t skipped_pairs() const noexcept { return skipped_pairs_; }

  /// Normal-derivative term at p_i along n_i. The derivative of the dipole
  /// potential is taken with respect to the source-to-query offset, which is
  /// the negated query gradient of the winding number: -<grad w(p_i), n_i>.
  double normal_derivative(std::size_t i) const { return -dot(checked(grad_w_)[i], normals_[i]); }

 private:
  template <typename T>
  std::span<const T> checked(const std::vector<T>& v) const {
    if (!fresh()) {
      throw Error(ErrorKind::StaleCache, "energy caches are at revision " + std::to_string(cache_revision_) +
                                             ", state is at " + std::to_string(revision_));
    }
    return v;
  }

  const PointCloud* cloud_;
  NormalField field_;
  std::vector<Vec3> normals_;
  std::vector<SamplePair> samples_;
  std::uint64_t revision_ = 1;
  std::uint64_t cache_revision_ = 0;

  DipoleSet dipoles_;
  std::vector<double> w_plus_, w_minus_;
  std::vector<Vec3> grad_w_;
  std::size_t skipped_pairs_ = 0;
};

struct EnergyReport {
  double total = 0.0;
  double data_term = 0.0;
  double penalty_term = 0.0;
  std::vector<double> per_point;
};

/// Boundary energy (the maximized objective):
///   sum_i a_i (|w(p_i-)| - |w(p_i+)|) d_i + penalty_g(w(p_i+), w(p_i-))
/// with d_i = EnergyState::normal_derivative(i).
inline EnergyReport boundary_energy(const EnergyState& state, double delta = kDefaultDelta) {
  const auto wp = state.w_plus();
  const auto wm = state.w_minus();
  const auto areas = state.cloud().areas();
  EnergyReport rep;
  rep.per_point.resize(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double data = areas[i] * (std::abs(wm[i]) - std::abs(wp[i])) * state.normal_derivative(i);
    const double pen = penalty_g(wp[i], wm[i], delta);
    rep.data_term += data;
    rep.penalty_term += pen;
    rep.per_point[i] = data + pen;
  }
  rep.total = rep.data_term + rep.penalty_term;
  return rep;
}

/// dE/dn_j for every normal, as a 3-vector (before the chart Jacobian).
inline std::vector<Vec3> energy_gradient_normals(const EnergyState& state, double delta = kDefaultDelta) {
  const std::size_t n = state.size();
  const auto wp = state.w_plus();
  const auto wm = state.w_minus();
  const auto gw = state.grad_w();
  const auto areas = state.cloud().areas();
  const auto pts = state.cloud().points();
  const auto normals = state.normals();
  const auto samples = state.samples();

  // c_i = |w-| - |w+|, d_i = -<grad w(p_i), n_i>.
  std::vector<double> c(n), d(n);
  std::vector<Vec3> coupled(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = std::abs(wm[i]) - std::abs(wp[i]);
    d[i] = state.normal_derivative(i);
    coupled[i] = normals[i] * (areas[i] * c[i]);
  }
  // Path through grad w(p_i), i != j: the query-gradient kernel is symmetric
  // in (p_i, p_j), so the sum is a dipole gradient with moments a_i c_i n_i.
  const DipoleSet coupled_set(pts, coupled);

  // Path through w at the probes: weight of each probe's dw/dn_j.
  std::vector<Vec3> probe_pos(2 * n);
  std::vector<double> beta(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    probe_pos[i] = samples[i].plus;
    probe_pos[n + i] = samples[i].minus;
    beta[i] = -areas[i] * d[i] * detail::sign0(wp[i]) + penalty_g_derivative(wp[i], delta);
    beta[n + i] = areas[i] * d[i] * detail::sign0(wm[i]) + penalty_g_derivative(wm[i], delta);
  }
  std::vector<double> qx(2 * n), qy(2 * n), qz(2 * n);
  for (std::size_t k = 0; k < 2 * n; ++k) qx[k] = probe_pos[k].x, qy[k] = probe_pos[k].y, qz[k] = probe_pos[k].z;

  std::vector<Vec3> out(n);
  parallel_for(n, [&](std::size_t j) {
    const Vec3 explicit_part = gw[j] * (-areas[j] * c[j]);
    const Vec3 through_grad = coupled_set.gradient(pts[j], j) * (-areas[j]);

    double fx = 0.0, fy = 0.0, fz = 0.0;
    const Vec3 p = pts[j];
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const double dx = p.x - qx[k], dy = p.y - qy[k], dz = p.z - qz[k];
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 < kSingularRadius * kSingularRadius) continue;
      const double s = beta[k] / (r2 * std::sqrt(r2));
      fx += s * dx;
      fy += s * dy;
      fz += s * dz;
    }
    const Vec3 through_w = Vec3{fx, fy, fz} * (areas[j] * kInvFourPi);
    out[j] = explicit_part + through_grad + through_w;
  });
  return out;
}

struct AngleGradient {
  double du = 0.0;
  double dv = 0.0;
};

/// Analytic gradient of boundary_energy with respect to every (u_i, v_i),
/// samples held fixed.
inline std::vector<AngleGradient> energy_gradient(const EnergyState& state, double delta = kDefaultDelta) {
  const auto gn = energy_gradient_normals(state, delta);
  const auto angles = state.normal_field().angles();
  std::vector<AngleGradient> out(gn.size());
  for (std::size_t j = 0; j < gn.size(); ++j) {
    const auto jac = normal_jacobian(angles[j].u, angles[j].v);
    out[j] = {dot(gn[j], jac.dn_du), dot(gn[j], jac.dn_dv)};
  }
  return out;
}

/// Same gradient flattened as (du_0..du_{n-1}, dv_0..dv_{n-1}).
inline std::vector<double> flatten(std::span<const AngleGradient> g) {
  std::vector<double> x(2 * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    x[i] = g[i].du;
    x[g.size() + i] = g[i].dv;
  }
  return x;
}

}  // namespace windnorm
