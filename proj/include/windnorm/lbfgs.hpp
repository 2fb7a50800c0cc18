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
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace windnorm {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Limited-memory curvature pairs (s_k, y_k), oldest first.
class LbfgsHistory {
 public:
  explicit LbfgsHistory(std::size_t memory = 10) : memory_(memory) {}

  struct Pair {
    std::vector<double> s, y;
    double rho = 0.0;  // 1 / <s, y>
  };

  /// Stores the pair if it satisfies the curvature condition
  /// <s, y> > 1e-12 <y, y>. The bound scales with the pair so short terminal
  /// steps still update the model.
  bool push(std::vector<double> s, std::vector<double> y) {
    const double sy = dot(s, y);
    if (!(sy > 0.0) || !(sy > 1e-12 * dot(y, y))) return false;
    if (pairs_.size() == memory_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
    return true;
  }

  void clear() { pairs_.clear(); }
  bool empty() const noexcept { return pairs_.empty(); }
  std::size_t size() const noexcept { return pairs_.size(); }
  std::size_t memory() const noexcept { return memory_; }
  const std::deque<Pair>& pairs() const noexcept { return pairs_; }

 private:
  std::size_t memory_;
  std::deque<Pair> pairs_;
};

/// Two-loop recursion: returns -H g with H the L-BFGS inverse Hessian
/// estimate, initial scaling <s, y> / <y, y> from the newest pair. Empty
/// history gives -g.
inline std::vector<double> lbfgs_direction(const LbfgsHistory& history, std::span<const double> grad) {
  std::vector<double> q(grad.begin(), grad.end());
  const auto& pairs = history.pairs();
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const auto& p = pairs[k];
    alpha[k] = p.rho * dot(p.s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    const double gamma = 1.0 / (last.rho * dot(last.y, last.y));
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const double beta = p.rho * dot(p.y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * p.s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

struct LineSearchParams {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_trials = 20;
  double max_step = 1e20;
};

struct LineSearchResult {
  enum class Status { StrongWolfe, SufficientDecrease, Failed };
  Status status = Status::Failed;
  double step = 0.0;
  double value = 0.0;
  int trials = 0;

  bool accepted() const noexcept { return status != Status::Failed; }
};

/// Strong-Wolfe line search (bracketing then zoom with safeguarded cubic
/// interpolation) for minimizing phi(a) = f(x + a d).
///
/// `phi(a)` returns {value, derivative}. If the trial budget runs out, the best
/// step satisfying sufficient decrease is returned (backtracking fallback);
/// otherwise the search fails.
template <typename Phi>
LineSearchResult strong_wolfe_search(Phi&& phi, double f0, double d0, double initial_step,
                                     const LineSearchParams& params = {}) {
  LineSearchResult res;
  res.value = f0;
  if (!(d0 < 0.0) || !(initial_step > 0.0)) return res;

  double best_step = 0.0, best_value = f0;
  auto note = [&](double a, double f) {
    if (std::isfinite(f) && f <= f0 + params.c1 * a * d0 && f < best_value) {
      best_step = a;
      best_value = f;
    }
  };
  auto finish_fallback = [&]() {
    if (best_step > 0.0) {
      res.status = LineSearchResult::Status::SufficientDecrease;
      res.step = best_step;
      res.value = best_value;
    }
    return res;
  };

  auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
    while (res.trials < params.max_trials) {
      const double width = hi - lo;
      double a = 0.5 * (lo + hi);
      // Cubic through (lo, f_lo, d_lo) and (hi, f_hi, d_hi).
      const double d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (lo - hi);
      const double disc = d1 * d1 - d_lo * d_hi;
      if (disc >= 0.0 && std::isfinite(f_hi) && std::isfinite(d_hi)) {
        const double d2 = std::copysign(std::sqrt(disc), hi - lo);
        const double cand = hi - (hi - lo) * (d_hi + d2 - d1) / (d_hi - d_lo + 2.0 * d2);
        const double lo_b = std::min(lo, hi) + 0.1 * std::abs(width);
        const double hi_b = std::max(lo, hi) - 0.1 * std::abs(width);
        if (std::isfinite(cand) && cand >= lo_b && cand <= hi_b) a = cand;
      }
      const auto [f, d] = phi(a);
      ++res.trials;
      note(a, f);
      if (!std::isfinite(f) || f > f0 + params.c1 * a * d0 || f >= f_lo) {
        hi = a, f_hi = f, d_hi = d;
      } else {
        if (std::abs(d) <= -params.c2 * d0) {
          res.status = LineSearchResult::Status::StrongWolfe;
          res.step = a;
          res.value = f;
          return res;
        }
        if (d * (hi - lo) >= 0.0) hi = lo, f_hi = f_lo, d_hi = d_lo;
        lo = a, f_lo = f, d_lo = d;
      }
      if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return finish_fallback();
  };

  double prev = 0.0, f_prev = f0, d_prev = d0;
  double a = std::min(initial_step, params.max_step);
  while (res.trials < params.max_trials) {
    const auto [f, d] = phi(a);
    ++res.trials;
    note(a, f);
    if (!std::isfinite(f) || f > f0 + params.c1 * a * d0 || (res.trials > 1 && f >= f_prev)) {
      return zoom(prev, f_prev, d_prev, a, f, d);
    }
    if (std::abs(d) <= -params.c2 * d0) {
      res.status = LineSearchResult::Status::StrongWolfe;
      res.step = a;
      res.value = f;
      return res;
    }
    if (d >= 0.0) return zoom(a, f, d, prev, f_prev, d_prev);
    if (a >= params.max_step) break;
    prev = a, f_prev = f, d_prev = d;
    a = std::min(2.0 * a, params.max_step);
  }
  return finish_fallback();
}

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Plain L-BFGS minimization of a smooth function; `fg(x, g)` returns f(x)
/// and writes the gradient into g.
template <typename FG>
MinimizeResult lbfgs_minimize(FG&& fg, std::vector<double> x, double grad_tol, int max_iters,
                              std::size_t memory = 10, const LineSearchParams& params = {}) {
  const std::size_t dim = x.size();
  std::vector<double> g(dim), g_trial(dim), x_trial(dim);
  double f = fg(std::span<const double>(x), std::span<double>(g));
  LbfgsHistory history(memory);
  MinimizeResult res;
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    if (inf_norm(g) <= grad_tol) {
      res.converged = true;
      break;
    }
    auto dir = lbfgs_direction(history, g);
    double d0 = dot(dir, g);
    if (!(d0 < 0.0)) {
      history.clear();
      dir = lbfgs_direction(history, g);
      d0 = dot(dir, g);
    }
    const double step0 = history.empty() ? 1.0 / std::sqrt(dot(g, g)) : 1.0;
    double last_step = -1.0;
    auto phi = [&](double a) {
      for (std::size_t i = 0; i < dim; ++i) x_trial[i] = x[i] + a * dir[i];
      const double fv = fg(std::span<const double>(x_trial), std::span<double>(g_trial));
      last_step = a;
      return std::pair<double, double>{fv, dot(g_trial, dir)};
    };
    const auto ls = strong_wolfe_search(phi, f, d0, step0, params);
    if (!ls.accepted()) break;
    if (last_step != ls.step) phi(ls.step);
    std::vector<double> s(dim), y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = x_trial[i] - x[i];
      y[i] = g_trial[i] - g[i];
    }
    history.push(std::move(s), std::move(y));
    x = x_trial;
    g = g_trial;
    f = ls.value;
  }
  res.x = std::move(x);
  res.value = f;
  res.grad_norm = inf_norm(g);
  if (res.grad_norm <= grad_tol) res.converged = true;
  return res;
}

}  // namespace windnorm
