#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "slp/error.hpp"
#include "slp/scene_geometry.hpp"

namespace slp {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw IoError(where + ": expected a number, got '" + std::string(tok) + "'");
  return v;
}

}  // namespace detail

/// Reads the `v` / `f` subset of Wavefront OBJ. Polygons are fan-triangulated,
/// `a/b/c` references use only the vertex part, negative indices are relative.
/// Degenerate (zero-area) triangles are dropped.
inline TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      std::string x, y, z;
      if (!(ss >> x >> y >> z)) throw IoError(where + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(detail::parse_double(x, where), detail::parse_double(y, where),
                                 detail::parse_double(z, where));
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string ref;
      while (ss >> ref) {
        const std::string head = ref.substr(0, ref.find('/'));
        long idx = 0;
        const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
        if (res.ec != std::errc{} || idx == 0) throw IoError(where + ": bad face index '" + ref + "'");
        const long n = static_cast<long>(mesh.vertices.size());
        const long zero_based = idx > 0 ? idx - 1 : n + idx;
        if (zero_based < 0 || zero_based >= n) throw IoError(where + ": face index out of range");
        poly.push_back(static_cast<std::uint32_t>(zero_based));
      }
      if (poly.size() < 3) throw IoError(where + ": face needs at least 3 vertices");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
        if (mesh.face_area(mesh.faces.size() - 1) <= 0.0) mesh.faces.pop_back();
      }
    }
  }
  mesh.validate();
  return mesh;
}

inline void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& v : mesh.vertices)
    out << "v " << detail::format_double(v.x()) << ' ' << detail::format_double(v.y()) << ' '
        << detail::format_double(v.z()) << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// One pose per line: `frame_id fx fy cx cy r11 r12 r13 r21 ... r33 tx ty tz`.
/// Blank lines and `#` comments are skipped.
inline std::vector<CameraPose> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CameraPose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.size() != 17) throw IoError(where + ": expected 17 fields, got " + std::to_string(tok.size()));
    CameraPose p;
    int id = 0;
    const auto res = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), id);
    if (res.ec != std::errc{}) throw IoError(where + ": bad frame id");
    p.frame_id = id;
    p.fx = detail::parse_double(tok[1], where);
    p.fy = detail::parse_double(tok[2], where);
    p.cx = detail::parse_double(tok[3], where);
    p.cy = detail::parse_double(tok[4], where);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = detail::parse_double(tok[5 + 3 * r + c], where);
    for (int i = 0; i < 3; ++i) p.translation(i) = detail::parse_double(tok[14 + i], where);
    try {
      p.validate();
    } catch (const ContractViolation& e) {
      throw IoError(where + ": " + e.what());
    }
    poses.push_back(p);
  }
  return poses;
}

inline void write_poses(const std::filesystem::path& path, const std::vector<CameraPose>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# frame_id fx fy cx cy r11 r12 r13 r21 r22 r23 r31 r32 r33 tx ty tz\n";
  for (const auto& p : poses) {
    out << p.frame_id << ' ' << detail::format_double(p.fx) << ' ' << detail::format_double(p.fy) << ' '
        << detail::format_double(p.cx) << ' ' << detail::format_double(p.cy);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << detail::format_double(p.rotation(r, c));
    for (int i = 0; i < 3; ++i) out << ' ' << detail::format_double(p.translation(i));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace slp
