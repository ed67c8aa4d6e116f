#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slp/error.hpp"
#include "slp/evaluation.hpp"
#include "slp/mask_io.hpp"
#include "slp/propagation.hpp"
#include "slp/synthetic_scene.hpp"

namespace slp {

/// Writes masks/<object>/<frame>.pbm plus masks/index.txt. Returns the index path.
inline std::filesystem::path write_masks(const std::filesystem::path& out_dir, const SlpResult& result) {
  namespace fs = std::filesystem;
  const fs::path masks = out_dir / "masks";
  std::error_code ec;
  fs::create_directories(masks, ec);
  if (ec) throw IoError("cannot create " + masks.string() + ": " + ec.message());
  std::vector<MaskIndexEntry> index;
  for (const auto& obj : result.objects) {
    char dir[32];
    std::snprintf(dir, sizeof(dir), "obj_%06d", obj.id);
    fs::create_directories(masks / dir, ec);
    if (ec) throw IoError("cannot create " + (masks / dir).string() + ": " + ec.message());
    for (const auto& [frame, mask] : obj.history) {
      const std::string rel = std::string(dir) + "/" + frame_file_name(frame, ".pbm");
      write_pbm(masks / rel, mask);
      index.push_back({obj.id, frame, rel});
    }
  }
  const fs::path index_path = masks / "index.txt";
  write_mask_index(index_path, index);
  return index_path;
}

struct StageTimes {
  double encode_ms = 0.0;
  double find_ms = 0.0;
  double discover_ms = 0.0;
};

inline StageTimes stage_times(const SlpResult& result) {
  StageTimes t;
  for (const auto& f : result.timings) {
    t.encode_ms += f.encode_ms;
    t.find_ms += f.find_ms;
    t.discover_ms += f.discover_ms;
  }
  return t;
}

/// Everything needed to reproduce a run, plus its counters and timings.
struct RunManifest {
  SlpConfig config;
  std::string segmenter = "oracle";
  double sigma = 0.05;
  int dim = 32;
  std::string data;
  std::size_t frames = 0;
  std::size_t objects = 0;
  std::size_t mesh_faces = 0;
  SlpCounters counters;
  StageTimes stages;
  double total_ms = 0.0;
  double sfm_ms = 0.0;
  double pxl_ms = 0.0;
};

/// INI-style text: `[config]` holds the reproducible settings, `[stats]` the
/// counters and wall-clock stage times.
inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& c = m.config;
  out << "# slp run manifest\n[config]\n"
      << "variant = " << to_string(c.variant) << "\n"
      << "k = " << c.k << "\n"
      << "F = " << c.skip_frames << "\n"
      << "g = " << c.grid_side << "\n"
      << "threshold = " << detail::format_double(c.threshold) << "\n"
      << "kernel = " << c.kernel_side << "\n"
      << "iterations = " << c.iterations << "\n"
      << "seed = " << c.seed << "\n"
      << "dedup = " << detail::format_double(c.dedup_iou) << "\n"
      << "segmenter = " << m.segmenter << "\n"
      << "sigma = " << detail::format_double(m.sigma) << "\n"
      << "dim = " << m.dim << "\n"
      << "data = " << m.data << "\n"
      << "[stats]\n"
      << "frames = " << m.frames << "\n"
      << "objects = " << m.objects << "\n"
      << "mesh_faces = " << m.mesh_faces << "\n"
      << "get_masks_calls = " << m.counters.get_masks_calls << "\n"
      << "find_object_calls = " << m.counters.find_object_calls << "\n"
      << "encode_calls = " << m.counters.encode_calls << "\n"
      << "encode_ms = " << report_detail::fixed(m.stages.encode_ms, 3) << "\n"
      << "find_ms = " << report_detail::fixed(m.stages.find_ms, 3) << "\n"
      << "discover_ms = " << report_detail::fixed(m.stages.discover_ms, 3) << "\n"
      << "total_ms = " << report_detail::fixed(m.total_ms, 3) << "\n"
      << "sfm_ms = " << report_detail::fixed(m.sfm_ms, 3) << "\n"
      << "pxl_ms = " << report_detail::fixed(m.pxl_ms, 3) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

/// section -> key -> raw value
using ManifestSections = std::map<std::string, std::map<std::string, std::string>>;

inline ManifestSections read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  ManifestSections sections;
  std::string section;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed line '" + line + "'");
    sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return sections;
}

}  // namespace slp
