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

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windnorm/core.hpp"
#include "windnorm/energy.hpp"
#include "windnorm/eval.hpp"
#include "windnorm/gwn.hpp"
#include "windnorm/kdtree.hpp"
#include "windnorm/lbfgs.hpp"
#include "windnorm/voronoi.hpp"

namespace windnorm {

struct OptimConfig {
  int max_outer_iters = 200;
  std::size_t lbfgs_memory = 10;
  double grad_tol = 1e-6;         // on the inf-norm of the gradient
  double energy_rel_tol = 1e-8;   // relative change of the energy above the penalty floor
  LineSearchParams line_search{};
  double delta = kDefaultDelta;
  double box_scale = 2.0;
  std::size_t knn_k = 15;
  RngSeed seed{};
  bool deterministic = true;
  /// Replaces the random initialization when set (one normal per input point).
  std::optional<std::vector<Vec3>> initial_normals;

  void validate() const {
    if (max_outer_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_outer_iters must be >= 1");
    if (lbfgs_memory < 1) throw Error(ErrorKind::InvalidArgument, "lbfgs_memory must be >= 1");
    if (!(grad_tol > 0.0) || !(energy_rel_tol > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "tolerances must be positive");
    }
    if (!(0.0 < line_search.c1 && line_search.c1 < line_search.c2 && line_search.c2 < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "line search needs 0 < c1 < c2 < 1");
    }
    if (line_search.max_trials < 1) throw Error(ErrorKind::InvalidArgument, "line search needs >= 1 trial");
    if (!(delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 0");
    if (!(box_scale > 1.0)) throw Error(ErrorKind::InvalidArgument, "box_scale must exceed 1");
  }
};

/// One outer iteration: energy after the accepted step, evaluated with the
/// samples selected at the top of the iteration.
struct IterationRecord {
  int iteration = 0;
  double start_total = 0.0;  // before the step, same samples
  double total = 0.0;
  double data_term = 0.0;
  double penalty_term = 0.0;
  double grad_norm = 0.0;  // inf-norm at the accepted point
  long inside_out = -1;    // -1 without a classifier
  long same_side = -1;
  bool selection_changed = false;
  std::string step;  // "lbfgs", "steepest", "fallback", "none"
  double wallclock = 0.0;
};

struct OrientationResult {
  NormalField normals;
  std::vector<IterationRecord> energy_trace;
  std::vector<long> inside_out_trace;
  int iterations_run = 0;
  bool converged = false;
  std::string stop_reason;
  double wallclock = 0.0;
  std::vector<double> areas;
  GwnDiagnostics diagnostics;
  std::size_t merged_duplicates = 0;

  std::vector<Vec3> normal_vectors() const { return normals.normals(); }
};

struct OrientHooks {
  std::function<void(const IterationRecord&)> progress;
  /// Inside/outside oracle for diagnostics (analytic shapes only).
  std::function<bool(const Vec3&)> inside;
};

/// Maps each point to the first earlier point within `tol` (or itself).
inline std::vector<std::size_t> duplicate_representatives(std::span<const Vec3> points, double tol = 1e-12) {
  const KdTree tree(points);
  std::vector<std::size_t> rep(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    rep[i] = i;
    std::size_t k = 8;
    while (true) {
      const auto nb = tree.knn(points[i], std::min(k, points.size()));
      bool all_close = true;
      for (const auto& c : nb) {
        if (c.dist2 > tol * tol) {
          all_close = false;
          break;
        }
        if (c.index < rep[i]) rep[i] = rep[c.index];
      }
      if (!all_close || nb.size() == points.size()) break;
      k *= 2;
    }
  }
  return rep;
}

namespace detail {

/// Objective bookkeeping for the minimizer: f = -E, g = -dE/dx.
struct Evaluation {
  EnergyReport report;
  std::vector<double> grad;  // of the minimized function
  double f = 0.0;
};

inline Evaluation evaluate(EnergyState& state, std::span<const double> x, double delta) {
  state.set_normals(NormalField::from_variables(x));
  state.refresh();
  Evaluation ev;
  ev.report = boundary_energy(state, delta);
  ev.grad = flatten(energy_gradient(state, delta));
  for (double& v : ev.grad) v = -v;
  ev.f = -ev.report.total;
  return ev;
}

/// Energy when every probe sits inside the penalty-free band: n * g(0, 0).
/// Relative changes are measured above it; otherwise this constant dwarfs
/// the data term.
inline double penalty_floor(std::size_t n, double delta) {
  return static_cast<double>(n) * penalty_g(0.0, 0.0, delta);
}

inline double relative_change(double before, double after, double floor) {
  const double scale = std::max(std::abs(before - floor), std::abs(after - floor));
  return std::abs(after - before) / std::max(scale, 1e-300);
}

/// Steepest direction under the metric of the (u, v) chart: a step du turns
/// the normal by sin(v) du, so u components are divided by sin^2 v, clamped
/// near the poles.
inline std::vector<double> chart_steepest(std::span<const double> x, std::span<const double> grad) {
  const std::size_t n = x.size() / 2;
  std::vector<double> d(grad.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double sv = std::sin(x[n + i]);
    d[i] = -grad[i] / std::max(sv * sv, 0.1);
    d[n + i] = -grad[n + i];
  }
  return d;
}

/// Shortest vector in the segment between a and b.
inline std::vector<double> min_norm_combination(std::span<const double> a, std::span<const double> b) {
  double diff2 = 0.0, cross = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    diff2 += d * d;
    cross += d * b[k];
  }
  const double lambda = diff2 > 0.0 ? std::clamp(-cross / diff2, 0.0, 1.0) : 1.0;
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = lambda * a[k] + (1.0 - lambda) * b[k];
  return out;
}

inline bool finite(const Evaluation& ev) {
  if (!std::isfinite(ev.f)) return false;
  for (double v : ev.grad) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace detail

/// Orients a (normalized) cloud by maximizing the boundary energy:
/// Voronoi diagram and areas once, then per outer iteration re-select the
/// probe pairs and take one L-BFGS step with the pairs held fixed.
inline OrientationResult orient(const PointCloud& input, const OptimConfig& config, const OrientHooks& hooks = {}) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); };

  if (input.size() < 4) throw Error(ErrorKind::DegenerateCloud, "need at least 4 points");
  if (config.initial_normals && config.initial_normals->size() != input.size()) {
    throw Error(ErrorKind::LengthMismatch, "initial normals must match the point count");
  }

  // Duplicates are merged before the Voronoi diagram; their normals are
  // copied from the surviving point at the end.
  const auto rep = duplicate_representatives(input.points());
  std::vector<std::size_t> unique_of(input.size());
  std::vector<Vec3> unique_pts;
  std::vector<std::size_t> unique_src;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rep[i] == i) {
      unique_of[i] = unique_pts.size();
      unique_pts.push_back(input[i]);
      unique_src.push_back(i);
    } else {
      unique_of[i] = unique_of[rep[i]];
    }
  }
  if (unique_pts.size() < 4) throw Error(ErrorKind::DuplicatePoints, "fewer than 4 distinct points");

  OrientationResult result;
  result.merged_duplicates = input.size() - unique_pts.size();
  PointCloud cloud(std::move(unique_pts));
  const std::size_t n = cloud.size();

  const VoronoiDiagram diagram = build_diagram(cloud, config.box_scale);
  cloud.set_areas(estimate_areas(cloud, config.knn_k, &result.diagnostics));

  NormalField field;
  if (config.initial_normals) {
    std::vector<Vec3> init(n);
    for (std::size_t u = 0; u < n; ++u) init[u] = (*config.initial_normals)[unique_src[u]];
    field = NormalField::from_normals(init);
  } else {
    field = init_random_normals(n, config.seed);
  }

  std::vector<double> x = field.to_variables();
  EnergyState state(cloud, field, select_all_samples(diagram, field.normals()));
  LbfgsHistory history(config.lbfgs_memory);
  std::vector<SamplePair> prev_samples;
  double prev_step_norm = -1.0;
  const double floor = detail::penalty_floor(n, config.delta);
  std::vector<double> x_good = x;

  auto finish = [&](bool converged, std::string reason) {
    result.converged = converged;
    result.stop_reason = std::move(reason);
    result.iterations_run = static_cast<int>(result.energy_trace.size());
    const NormalField unique_field = NormalField::from_variables(x_good);
    std::vector<SphericalAngles> angles(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) angles[i] = unique_field[unique_of[i]];
    result.normals = NormalField(std::move(angles));
    result.areas.assign(cloud.areas().begin(), cloud.areas().end());
    result.diagnostics.skipped_pairs += state.skipped_pairs();
    result.wallclock = elapsed();
    return result;
  };

  for (int iter = 0; iter < config.max_outer_iters; ++iter) {
    const auto normals_now = NormalField::from_variables(x).normals();
    auto samples = select_all_samples(diagram, normals_now);
    const bool changed = samples != prev_samples;
    if (changed) history.clear();
    prev_samples = samples;
    state.set_samples(std::move(samples));

    const auto start = detail::evaluate(state, x, config.delta);
    if (!detail::finite(start)) return finish(false, "non-finite energy");

    IterationRecord rec;
    rec.iteration = iter;
    rec.selection_changed = changed;
    if (hooks.inside) {
      const auto c = inside_out_count(state.samples(), hooks.inside);
      rec.inside_out = static_cast<long>(c.inside_out);
      rec.same_side = static_cast<long>(c.same_side);
    }

    rec.start_total = start.report.total;
    const double gnorm0 = inf_norm(start.grad);
    if (gnorm0 <= config.grad_tol) {
      rec.total = start.report.total;
      rec.data_term = start.report.data_term;
      rec.penalty_term = start.report.penalty_term;
      rec.grad_norm = gnorm0;
      rec.step = "none";
      rec.wallclock = elapsed();
      result.energy_trace.push_back(rec);
      result.inside_out_trace.push_back(rec.inside_out);
      if (hooks.progress) hooks.progress(rec);
      x_good = x;
      return finish(true, "gradient tolerance");
    }

    std::vector<double> dir =
        history.empty() ? detail::chart_steepest(x, start.grad) : lbfgs_direction(history, start.grad);
    double d0 = dot(dir, start.grad);
    if (!(d0 < 0.0)) {
      history.clear();
      dir = detail::chart_steepest(x, start.grad);
      d0 = dot(dir, start.grad);
    }
    if (!(d0 < 0.0)) throw Error(ErrorKind::NumericalFailure, "non-descent direction after history reset");

    std::vector<double> x_trial(x.size());
    std::optional<detail::Evaluation> last;
    double last_step = -1.0;
    std::vector<double> cur_dir;
    auto phi = [&](double a) {
      for (std::size_t k = 0; k < x.size(); ++k) x_trial[k] = x[k] + a * cur_dir[k];
      last = detail::evaluate(state, x_trial, config.delta);
      last_step = a;
      if (!detail::finite(*last)) return std::pair<double, double>{std::numeric_limits<double>::infinity(), 0.0};
      return std::pair<double, double>{last->f, dot(last->grad, cur_dir)};
    };
    auto initial_step = [&](const std::vector<double>& d) {
      if (!history.empty()) return 1.0;
      const double dn = std::sqrt(dot(d, d));
      return prev_step_norm > 0.0 ? prev_step_norm / dn : 1.0 / dn;
    };
    // Searches along d and leaves the accepted point in `last`. Success means
    // the energy moved by more than the tolerance; a flat strong-Wolfe
    // acceptance is remembered as evidence of convergence. At a kink of |w|
    // the zoom can collapse onto a near-zero step, so a flat result from one
    // direction does not end the iteration.
    bool flat = false;
    auto search = [&](std::vector<double> d) {
      cur_dir = std::move(d);
      const double slope = dot(cur_dir, start.grad);
      if (!(slope < 0.0)) return false;
      const auto ls = strong_wolfe_search(phi, start.f, slope, initial_step(cur_dir), config.line_search);
      if (!ls.accepted()) return false;
      if (last_step != ls.step) phi(ls.step);
      if (detail::relative_change(start.report.total, last->report.total, floor) > config.energy_rel_tol) return true;
      flat = flat || ls.status == LineSearchResult::Status::StrongWolfe;
      return false;
    };
    auto negated = [](std::span<const double> g) {
      std::vector<double> d(g.begin(), g.end());
      for (double& v : d) v = -v;
      return d;
    };

    rec.step = history.empty() ? "steepest" : "lbfgs";
    bool ok = search(dir);
    if (!ok && !history.empty()) {
      history.clear();
      rec.step = "steepest";
      ok = search(detail::chart_steepest(x, start.grad));
    }
    if (!ok) {
      // Probe across the suspected kink with the fixed fallback step, then
      // search along the shortest convex combination of the gradients on
      // either side, which descends on both pieces.
      cur_dir = negated(start.grad);
      const double fallback_step = 1e-3 / std::sqrt(dot(start.grad, start.grad));
      phi(fallback_step);
      if (detail::finite(*last)) {
        const std::vector<double> beyond = last->grad;
        rec.step = "bundle";
        ok = search(negated(detail::min_norm_combination(start.grad, beyond)));
      }
      if (!ok && flat) {
        rec.total = start.report.total;
        rec.data_term = start.report.data_term;
        rec.penalty_term = start.report.penalty_term;
        rec.grad_norm = gnorm0;
        rec.step = "none";
        rec.wallclock = elapsed();
        result.energy_trace.push_back(rec);
        result.inside_out_trace.push_back(rec.inside_out);
        if (hooks.progress) hooks.progress(rec);
        x_good = x;
        return finish(true, "energy tolerance");
      }
      if (!ok) {
        rec.step = "fallback";
        cur_dir = negated(start.grad);
        phi(fallback_step);
        // Taken even if it lowers the objective; stop only when it changes nothing.
        if (!detail::finite(*last) ||
            detail::relative_change(start.report.total, last->report.total, floor) <= config.energy_rel_tol) {
          x_good = x;
          return finish(false, "line search stalled");
        }
      }
    }
    const detail::Evaluation& acc = *last;

    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      s[k] = x_trial[k] - x[k];
      y[k] = acc.grad[k] - start.grad[k];
    }
    prev_step_norm = std::sqrt(dot(s, s));
    history.push(std::move(s), std::move(y));
    x = x_trial;
    x_good = x;

    rec.total = acc.report.total;
    rec.data_term = acc.report.data_term;
    rec.penalty_term = acc.report.penalty_term;
    rec.grad_norm = inf_norm(acc.grad);
    rec.wallclock = elapsed();
    result.energy_trace.push_back(rec);
    result.inside_out_trace.push_back(rec.inside_out);
    if (hooks.progress) hooks.progress(rec);

    if (rec.grad_norm <= config.grad_tol) return finish(true, "gradient tolerance");
  }
  return finish(false, "max iterations");
}

}  // namespace windnorm
