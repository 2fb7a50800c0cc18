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

// Command-line front end (orient / synth / eval). Depends on the vendored
// CLI11 and nlohmann/json headers in addition to the core library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "windnorm/core.hpp"
#include "windnorm/eval.hpp"
#include "windnorm/io.hpp"
#include "windnorm/optim.hpp"

namespace windnorm::cli {

using nlohmann::json;

enum ExitCode : int { kConverged = 0, kError = 1, kMaxIterations = 2 };

inline long peak_memory_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::stol(line.substr(6));
  }
  return -1;
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline json to_json(const AngleStats& st) {
  return {{"mean_deg", st.mean_deg},
          {"std_deg", st.std_deg},
          {"consistency_rate", st.consistency_rate},
          {"histogram", st.histogram},
          {"bin_width_deg", 5.0}};
}

inline void write_histogram_csv(const std::string& path, const AngleStats& st) {
  write_file(path, [&](std::ostream& os) {
    os << "bin_start_deg,count\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) os << 5 * b << ',' << st.histogram[b] << '\n';
  });
}

inline void write_json(const std::string& path, const json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

inline std::vector<Vec3> unit(std::vector<Vec3> v) {
  for (auto& n : v) {
    const double len = norm(n);
    if (len > 0.0) n = n / len;
  }
  return v;
}

struct OrientArgs {
  std::string input;
  std::string out = "oriented.ply";
  std::string report;
  std::string gt_normals;
  std::string histogram;
  std::string voronoi_dump;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double delta = kDefaultDelta;
  double box_scale = 2.0;
  std::size_t knn = 15;
  int max_iters = 200;
  double grad_tol = 1e-6;
  bool deterministic = false;
  bool quiet = false;
};

inline int cmd_orient(const OrientArgs& a) {
  const PointData in = read_point_file(a.input);
  if (in.points.size() < 4) {
    throw Error(ErrorKind::DegenerateCloud, a.input + " has " + std::to_string(in.points.size()) + " points, need 4");
  }
  PointCloud raw(in.points);
  if (a.noise > 0.0) raw = add_noise(raw, a.noise, RngSeed{a.seed});
  const auto [cloud, tf] = normalize_cloud(raw);

  OptimConfig cfg;
  cfg.seed = RngSeed{a.seed};
  cfg.delta = a.delta;
  cfg.box_scale = a.box_scale;
  cfg.knn_k = a.knn;
  cfg.max_outer_iters = a.max_iters;
  cfg.grad_tol = a.grad_tol;
  cfg.deterministic = a.deterministic;

  OrientHooks hooks;
  if (!a.quiet) {
    hooks.progress = [](const IterationRecord& r) {
      std::printf("iter %4d  energy %.9g  data %.9g  grad %.3e  step %s\n", r.iteration, r.total, r.data_term,
                  r.grad_norm, r.step.c_str());
      std::fflush(stdout);
    };
  }
  const OrientationResult res = orient(cloud, cfg, hooks);
  const std::vector<Vec3> normals = res.normal_vectors();
  // Uniform scale + translation leaves normals unchanged; positions go back
  // through the inverse transform.
  std::vector<Vec3> pts_out;
  pts_out.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts_out.push_back(tf.inverse(p));
  write_file(a.out, [&](std::ostream& os) { write_ply(os, pts_out, normals); });

  if (!a.voronoi_dump.empty()) {
    const auto diagram = build_diagram(cloud, a.box_scale);
    write_file(a.voronoi_dump, [&](std::ostream& os) { write_candidates_csv(os, diagram); });
  }

  json report;
  report["schema"] = 1;
  report["command"] = "orient";
  report["config"] = {{"seed", a.seed},       {"noise", a.noise},         {"delta", a.delta},
                      {"box_scale", a.box_scale}, {"knn", a.knn},         {"max_iters", a.max_iters},
                      {"grad_tol", a.grad_tol},   {"energy_rel_tol", cfg.energy_rel_tol},
                      {"lbfgs_memory", cfg.lbfgs_memory}, {"deterministic", a.deterministic},
                      {"threads", worker_count()}};
  report["input"] = {{"path", a.input},
                     {"n", in.points.size()},
                     {"bbox", {{"min", to_json(raw.bbox().min)}, {"max", to_json(raw.bbox().max)}}},
                     {"merged_duplicates", res.merged_duplicates}};
  json trace = json::array();
  for (const auto& r : res.energy_trace) {
    trace.push_back({{"iteration", r.iteration},
                     {"start_energy", r.start_total},
                     {"energy", r.total},
                     {"data_term", r.data_term},
                     {"penalty_term", r.penalty_term},
                     {"grad_norm", r.grad_norm},
                     {"inside_out", r.inside_out},
                     {"step", r.step},
                     {"wallclock", r.wallclock}});
  }
  report["trace"] = trace;
  report["result"] = {{"converged", res.converged},
                      {"stop_reason", res.stop_reason},
                      {"iterations", res.iterations_run},
                      {"wallclock_s", res.wallclock}};
  report["diagnostics"] = {{"skipped_pairs", res.diagnostics.skipped_pairs},
                           {"degenerate_neighborhoods", res.diagnostics.degenerate_neighborhoods}};
  if (!a.gt_normals.empty()) {
    const PointData gt = read_point_file(a.gt_normals);
    // A 6-column file carries normals in its last three columns; a 3-column
    // file is read as normals directly.
    const std::vector<Vec3> gt_n = unit(gt.has_normals() ? gt.normals : gt.points);
    const AngleStats st = angle_stats(normals, gt_n);
    report["angle_stats"] = to_json(st);
    if (!a.histogram.empty()) write_histogram_csv(a.histogram, st);
    if (!a.quiet) {
      std::printf("angle mean %.3f deg  std %.3f deg  consistency %.4f\n", st.mean_deg, st.std_deg,
                  st.consistency_rate);
    }
  }
  report["peak_memory_kb"] = peak_memory_kb();
  report["outputs"] = {{"ply", a.out}, {"report", a.report}};
  if (!a.report.empty()) write_json(a.report, report);

  if (!a.quiet) {
    std::printf("%s after %d iterations (%s), %.2f s\n", res.converged ? "converged" : "stopped", res.iterations_run,
                res.stop_reason.c_str(), res.wallclock);
  }
  return res.converged ? kConverged : kMaxIterations;
}

struct SynthArgs {
  std::string shape = "sphere";
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  double major = 1.0;
  double minor = 0.3;
  double spacing = 0.02;
  double gap = 0.5;
  std::string out;
  std::string gt_out;
};

inline ShapeKind parse_shape(const std::string& s) {
  static const std::map<std::string, ShapeKind> kinds = {{"sphere", ShapeKind::Sphere},
                                                         {"torus", ShapeKind::Torus},
                                                         {"plane-grid", ShapeKind::PlaneGrid},
                                                         {"two-spheres", ShapeKind::TwoSpheres}};
  const auto it = kinds.find(s);
  if (it == kinds.end()) throw Error(ErrorKind::BadSpec, "unknown shape '" + s + "'");
  return it->second;
}

/// Sidecar path: "<stem>.gt.xyz" next to the positions file.
inline std::string sidecar_path(const std::string& out) {
  const auto dot = out.find_last_of('.');
  const auto slash = out.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + ".gt.xyz";
}

inline int cmd_synth(const SynthArgs& a) {
  ShapeSpec spec;
  spec.kind = parse_shape(a.shape);
  spec.count = a.n;
  spec.seed = RngSeed{a.seed};
  spec.major_radius = a.major;
  spec.minor_radius = a.minor;
  spec.spacing = a.spacing;
  spec.gap = a.gap;
  const GeneratedShape shape = generate_shape(spec);
  const std::string out = a.out.empty() ? a.shape + ".xyz" : a.out;
  const std::string gt = a.gt_out.empty() ? sidecar_path(out) : a.gt_out;
  write_file(out, [&](std::ostream& os) { write_xyz(os, shape.cloud.points()); });
  write_file(gt, [&](std::ostream& os) { write_xyz(os, shape.cloud.points(), shape.normals); });
  std::printf("wrote %zu points to %s, ground truth to %s\n", shape.cloud.size(), out.c_str(), gt.c_str());
  return kConverged;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string report = "eval.json";
  std::string histogram;
};

inline int cmd_eval(const EvalArgs& a) {
  const PointData pred = read_point_file(a.pred);
  const PointData gt = read_point_file(a.gt);
  if (pred.points.empty() || gt.points.empty()) throw Error(ErrorKind::InvalidArgument, "empty point file");
  if (!pred.has_normals()) throw Error(ErrorKind::InvalidArgument, a.pred + " carries no normals");
  if (!gt.has_normals()) throw Error(ErrorKind::InvalidArgument, a.gt + " carries no normals");

  json report;
  report["schema"] = 1;
  report["command"] = "eval";
  report["inputs"] = {{"pred", a.pred}, {"gt", a.gt}, {"n_pred", pred.points.size()}, {"n_gt", gt.points.size()}};
  report["chamfer"] = chamfer_points(pred.points, gt.points);

  const std::string hist = a.histogram.empty() ? a.report + ".hist.csv" : a.histogram;
  int code = kConverged;
  if (pred.points.size() == gt.points.size()) {
    const AngleStats st = angle_stats(unit(pred.normals), unit(gt.normals));
    report["angle_stats"] = to_json(st);
    write_histogram_csv(hist, st);
    std::printf("angle mean %.3f deg  std %.3f deg  consistency %.4f  chamfer %.6g\n", st.mean_deg, st.std_deg,
                st.consistency_rate, report["chamfer"].get<double>());
  } else {
    report["angle_stats"] = nullptr;
    report["error"] = "LengthMismatch: angle statistics need equal point counts";
    std::fprintf(stderr, "error: LengthMismatch: %zu predicted vs %zu ground-truth points\n", pred.points.size(),
                 gt.points.size());
    code = kError;
  }
  write_json(a.report, report);
  return code;
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"windnorm: consistent normal orientation for unoriented point clouds"};
  app.require_subcommand(1);

  OrientArgs oa;
  auto* orient_cmd = app.add_subcommand("orient", "orient an XYZ/PLY point cloud");
  orient_cmd->add_option("input", oa.input, "input XYZ or ASCII PLY")->required();
  orient_cmd->add_option("--out", oa.out, "oriented ASCII PLY output");
  orient_cmd->add_option("--report", oa.report, "JSON run report");
  orient_cmd->add_option("--seed", oa.seed, "seed for initialization and noise");
  orient_cmd->add_option("--noise", oa.noise, "Gaussian noise, fraction of the bbox diagonal");
  orient_cmd->add_option("--delta", oa.delta, "winding-number range relaxation");
  orient_cmd->add_option("--box-scale", oa.box_scale, "Voronoi clip box scale");
  orient_cmd->add_option("--knn", oa.knn, "neighborhood size for area weights");
  orient_cmd->add_option("--max-iters", oa.max_iters, "maximum outer iterations");
  orient_cmd->add_option("--grad-tol", oa.grad_tol, "gradient inf-norm tolerance");
  orient_cmd->add_flag("--deterministic", oa.deterministic, "fixed-order reductions");
  orient_cmd->add_option("--gt-normals", oa.gt_normals, "ground-truth normals for angle statistics");
  orient_cmd->add_option("--histogram", oa.histogram, "angle histogram CSV (with --gt-normals)");
  orient_cmd->add_option("--voronoi-dump", oa.voronoi_dump, "per-cell candidate CSV");
  orient_cmd->add_flag("--quiet", oa.quiet, "no progress log");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "sample an analytic shape");
  synth_cmd->add_option("--shape", sa.shape, "sphere | torus | plane-grid | two-spheres");
  synth_cmd->set_help_flag("--help", "print this help");
  synth_cmd->add_option("--n", sa.n, "point count");
  synth_cmd->add_option("--seed", sa.seed, "sampling seed");
  synth_cmd->add_option("--R", sa.major, "torus major radius");
  synth_cmd->add_option("--r", sa.minor, "torus minor radius");
  synth_cmd->add_option("--h", sa.spacing, "plane-grid spacing");
  synth_cmd->add_option("--gap", sa.gap, "two-spheres gap");
  synth_cmd->add_option("--out", sa.out, "positions XYZ (default <shape>.xyz)");
  synth_cmd->add_option("--gt", sa.gt_out, "ground-truth sidecar (default <stem>.gt.xyz)");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "compare predicted normals against ground truth");
  eval_cmd->add_option("pred", ea.pred, "predicted PLY/XYZ with normals")->required();
  eval_cmd->add_option("gt", ea.gt, "ground-truth PLY/XYZ with normals")->required();
  eval_cmd->add_option("--report", ea.report, "JSON report");
  eval_cmd->add_option("--histogram", ea.histogram, "angle histogram CSV (default <report>.hist.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kConverged : kError;
  }

  try {
    if (*orient_cmd) return cmd_orient(oa);
    if (*synth_cmd) return cmd_synth(sa);
    if (*eval_cmd) return cmd_eval(ea);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kError;
  }
  return kError;
}

}  // namespace windnorm::cli
