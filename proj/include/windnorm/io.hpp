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
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "windnorm/core.hpp"

namespace windnorm {

/// Positions and (optional) normals read from an XYZ or PLY file.
struct PointData {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty when the file carries none

  bool has_normals() const noexcept { return !normals.empty(); }
};

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool parse_reals(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) return false;
      out.push_back(v);
    } catch (...) {
      return false;
    }
  }
  return true;
}

inline bool blank_or_comment(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

inline Error parse_error(const std::string& path, std::size_t line, const std::string& what) {
  return Error(ErrorKind::Parse, path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

/// Whitespace-separated "x y z" or "x y z nx ny nz" per line; '#' comments
/// and blank lines are skipped. All data lines must use the same width.
inline PointData read_xyz(std::istream& is, const std::string& name = "<stream>") {
  PointData data;
  std::string line;
  std::vector<double> vals;
  std::size_t lineno = 0, width = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    if (!detail::parse_reals(line, vals)) throw detail::parse_error(name, lineno, "not a number in \"" + line + "\"");
    if (vals.size() != 3 && vals.size() != 6) {
      throw detail::parse_error(name, lineno, "expected 3 or 6 values, got " + std::to_string(vals.size()));
    }
    if (width == 0) width = vals.size();
    if (vals.size() != width) {
      throw detail::parse_error(name, lineno, "expected " + std::to_string(width) + " values like earlier lines");
    }
    for (double v : vals) {
      if (!std::isfinite(v)) throw detail::parse_error(name, lineno, "non-finite value");
    }
    data.points.push_back({vals[0], vals[1], vals[2]});
    if (width == 6) data.normals.push_back({vals[3], vals[4], vals[5]});
  }
  return data;
}

/// ASCII PLY with at least x, y, z vertex properties (nx, ny, nz optional).
inline PointData read_ply(std::istream& is, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") throw detail::parse_error(name, 1, "missing 'ply' magic");

  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false, ascii = false;
  std::vector<std::string> props;
  while (true) {
    if (!next()) throw detail::parse_error(name, lineno, "unterminated header");
    std::istringstream hs(line);
    std::string kw;
    hs >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      hs >> fmt;
      if (fmt != "ascii") throw detail::parse_error(name, lineno, "only ASCII PLY is supported");
      ascii = true;
    } else if (kw == "element") {
      std::string el;
      std::size_t count = 0;
      hs >> el >> count;
      in_vertex = el == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      }
    } else if (kw == "property") {
      if (!in_vertex) continue;
      std::string type, pname;
      hs >> type;
      if (type == "list") throw detail::parse_error(name, lineno, "list properties on vertices are not supported");
      hs >> pname;
      props.push_back(pname);
    }
  }
  if (!ascii) throw detail::parse_error(name, lineno, "missing format line");
  if (!seen_vertex) throw detail::parse_error(name, lineno, "no vertex element");

  auto index_of = [&](std::string_view p) -> long {
    for (std::size_t k = 0; k < props.size(); ++k) {
      if (props[k] == p) return static_cast<long>(k);
    }
    return -1;
  };
  const long ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  const long inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw detail::parse_error(name, lineno, "vertex element lacks x, y, z");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointData data;
  std::vector<double> vals;
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!next()) throw detail::parse_error(name, lineno, "expected " + std::to_string(vertex_count) + " vertices");
    if (!detail::parse_reals(line, vals) || vals.size() != props.size()) {
      throw detail::parse_error(name, lineno, "expected " + std::to_string(props.size()) + " numeric values");
    }
    data.points.push_back({vals[ix], vals[iy], vals[iz]});
    if (with_normals) data.normals.push_back({vals[inx], vals[iny], vals[inz]});
  }
  return data;
}

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Dispatches on the ".ply" suffix; everything else is read as XYZ.
inline PointData read_point_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  if (has_suffix(path, ".ply") || has_suffix(path, ".PLY")) return read_ply(is, path);
  return read_xyz(is, path);
}

inline void write_ply(std::ostream& os, std::span<const Vec3> points, std::span<const Vec3> normals) {
  if (normals.size() != points.size()) throw Error(ErrorKind::LengthMismatch, "normals and points differ in length");
  os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
     << "\nproperty double x\nproperty double y\nproperty double z\n"
        "property double nx\nproperty double ny\nproperty double nz\nend_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    const Vec3& n = normals[i];
    os << detail::format_real(p.x) << ' ' << detail::format_real(p.y) << ' ' << detail::format_real(p.z) << ' '
       << detail::format_real(n.x) << ' ' << detail::format_real(n.y) << ' ' << detail::format_real(n.z) << '\n';
  }
}

/// "x y z" lines, or "x y z nx ny nz" when normals are given.
inline void write_xyz(std::ostream& os, std::span<const Vec3> points, std::span<const Vec3> normals = {}) {
  if (!normals.empty() && normals.size() != points.size()) {
    throw Error(ErrorKind::LengthMismatch, "normals and points differ in length");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    os << detail::format_real(p.x) << ' ' << detail::format_real(p.y) << ' ' << detail::format_real(p.z);
    if (!normals.empty()) {
      const Vec3& n = normals[i];
      os << ' ' << detail::format_real(n.x) << ' ' << detail::format_real(n.y) << ' ' << detail::format_real(n.z);
    }
    os << '\n';
  }
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  writer(os);
  os.flush();
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path);
}

}  // namespace windnorm
