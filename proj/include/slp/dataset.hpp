#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "slp/error.hpp"
#include "slp/feature_field.hpp"
#include "slp/geometry_io.hpp"
#include "slp/image_io.hpp"
#include "slp/propagation.hpp"
#include "slp/scene_geometry.hpp"

namespace slp {

/// On-disk dataset: frames/ (required), labels/, mesh.obj, poses.txt and
/// embeddings/ (all optional). Files are keyed by their zero-padded numeric stem.
struct DatasetLayout {
  std::filesystem::path root;
  std::map<FrameId, std::filesystem::path> frames;
  std::map<FrameId, std::filesystem::path> labels;
  std::map<FrameId, std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> mesh;
  std::optional<std::filesystem::path> poses;

  [[nodiscard]] bool has_geometry() const noexcept { return mesh.has_value() && poses.has_value(); }

  [[nodiscard]] std::vector<FrameId> frame_ids() const {
    std::vector<FrameId> ids;
    for (const auto& [id, p] : frames) ids.push_back(id);
    return ids;
  }

  static DatasetLayout open(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
    DatasetLayout d;
    d.root = root;
    d.frames = scan(root / "frames", "");
    if (d.frames.empty()) throw IoError("dataset has no frames: " + (root / "frames").string());
    d.labels = scan(root / "labels", ".png");
    d.embeddings = scan(root / "embeddings", ".slpe");
    if (fs::is_regular_file(root / "mesh.obj")) d.mesh = root / "mesh.obj";
    if (fs::is_regular_file(root / "poses.txt")) d.poses = root / "poses.txt";
    return d;
  }

 private:
  static std::map<FrameId, std::filesystem::path> scan(const std::filesystem::path& dir, const std::string& extension) {
    std::map<FrameId, std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto& p = entry.path();
      if (!extension.empty() && p.extension() != extension) continue;
      const std::string stem = p.stem().string();
      if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
        continue;
      out.emplace(std::stoi(stem), p);
    }
    return out;
  }
};

inline std::map<FrameId, LabelImage> load_labels(const std::map<FrameId, std::filesystem::path>& files) {
  std::map<FrameId, LabelImage> out;
  for (const auto& [id, path] : files) out.emplace(id, read_label_png(path));
  return out;
}

/// Rasterizes every pose, spread across `threads` workers.
inline FrameBuffers rasterize_all(const TriangleMesh& mesh, const std::vector<CameraPose>& poses, int width,
                                  int height, unsigned threads = std::thread::hardware_concurrency()) {
  std::vector<std::optional<FaceIndexBuffer>> buffers(poses.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < poses.size(); i = next++) buffers[i] = rasterize(mesh, poses[i], width, height);
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
    worker();
  }
  FrameBuffers out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.insert_or_assign(poses[i].frame_id, std::move(*buffers[i]));
  return out;
}

struct LoadedGeometry {
  TriangleMesh mesh;
  std::vector<CameraPose> poses;
  FrameBuffers buffers;
  double load_ms = 0.0;   // mesh + pose ingestion
  double match_ms = 0.0;  // pixel <-> face matching
};

inline LoadedGeometry load_geometry(const DatasetLayout& dataset, int width, int height) {
  using Clock = std::chrono::steady_clock;
  if (!dataset.has_geometry()) throw ConfigError("dataset lacks mesh.obj and/or poses.txt: " + dataset.root.string());
  LoadedGeometry g;
  auto t0 = Clock::now();
  g.mesh = load_obj(*dataset.mesh);
  g.poses = load_poses(*dataset.poses);
  g.load_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  for (FrameId id : dataset.frame_ids())
    if (std::none_of(g.poses.begin(), g.poses.end(), [&](const CameraPose& p) { return p.frame_id == id; }))
      throw ConfigError("poses.txt has no pose for frame " + std::to_string(id));
  t0 = Clock::now();
  g.buffers = rasterize_all(g.mesh, g.poses, width, height);
  g.match_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return g;
}

}  // namespace slp
