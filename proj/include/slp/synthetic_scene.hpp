#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "slp/error.hpp"
#include "slp/geometry_io.hpp"
#include "slp/image_io.hpp"
#include "slp/rng.hpp"
#include "slp/scene_geometry.hpp"

namespace slp {

struct SceneSpec {
  std::uint64_t seed = 0;
  int object_count = 5;
  int frame_count = 60;
  int width = 128;
  int height = 128;
  double orbit_radius = 4.0;

  void validate() const {
    require(object_count >= 1, "SceneSpec: object_count must be >= 1");
    require(frame_count >= 2, "SceneSpec: frame_count must be >= 2");
    require(width > 0 && height > 0, "SceneSpec: frame dimensions must be positive");
    require(orbit_radius > 0.0, "SceneSpec: orbit_radius must be positive");
  }
};

/// Axis-aligned box standing on the ground plane (z = 0).
struct Cuboid {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

/// In-memory desk-scale world: ground plane (instance 0) plus cuboids
/// (instances 1..N), an orbiting camera, and the face -> instance map.
struct SyntheticScene {
  SceneSpec spec;
  TriangleMesh mesh;
  std::vector<std::uint16_t> face_instance;
  std::vector<Cuboid> cuboids;
  std::vector<CameraPose> poses;
  std::vector<std::array<std::uint8_t, 3>> colors;  // per instance

  [[nodiscard]] int instance_count() const noexcept { return static_cast<int>(cuboids.size()) + 1; }
};

namespace scene_detail {

inline constexpr int kGroundCells = 8;
inline constexpr double kMinProjectedExtent = 4.0;  // pixels
inline constexpr int kMaxLayoutAttempts = 1000;
// narrow enough that outer objects leave the view during the orbit
inline constexpr double kFocalScale = 1.0;
inline constexpr double kCameraHeight = 0.8;
inline constexpr double kMinPlacement = 0.76;
inline constexpr double kMaxPlacement = 0.86;
// clips shorter than this keep every cuboid near the centre and in view
inline constexpr int kShortClipFrames = 8;
inline constexpr double kCentrePlacement = 0.4;

inline void add_quad(TriangleMesh& mesh, std::vector<std::uint16_t>& owner, std::uint16_t instance,
                     const std::array<Eigen::Vector3d, 4>& corners) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const auto& c : corners) mesh.vertices.push_back(c);
  mesh.faces.push_back({base, base + 1, base + 2});
  mesh.faces.push_back({base, base + 2, base + 3});
  owner.push_back(instance);
  owner.push_back(instance);
}

inline void add_ground(SyntheticScene& s, double half) {
  const double step = 2.0 * half / kGroundCells;
  for (int j = 0; j < kGroundCells; ++j)
    for (int i = 0; i < kGroundCells; ++i) {
      const double x0 = -half + i * step;
      const double y0 = -half + j * step;
      add_quad(s.mesh, s.face_instance, 0,
               {Eigen::Vector3d(x0, y0, 0), Eigen::Vector3d(x0 + step, y0, 0), Eigen::Vector3d(x0 + step, y0 + step, 0),
                Eigen::Vector3d(x0, y0 + step, 0)});
    }
}

// Five visible sides; the bottom rests on the ground and is never seen.
inline void add_cuboid(SyntheticScene& s, std::uint16_t instance, const Cuboid& c) {
  const auto& a = c.min;
  const auto& b = c.max;
  auto v = [](double x, double y, double z) { return Eigen::Vector3d(x, y, z); };
  add_quad(s.mesh, s.face_instance, instance, {v(a.x(), a.y(), b.z()), v(b.x(), a.y(), b.z()), v(b.x(), b.y(), b.z()), v(a.x(), b.y(), b.z())});
  add_quad(s.mesh, s.face_instance, instance, {v(a.x(), a.y(), a.z()), v(b.x(), a.y(), a.z()), v(b.x(), a.y(), b.z()), v(a.x(), a.y(), b.z())});
  add_quad(s.mesh, s.face_instance, instance, {v(b.x(), a.y(), a.z()), v(b.x(), b.y(), a.z()), v(b.x(), b.y(), b.z()), v(b.x(), a.y(), b.z())});
  add_quad(s.mesh, s.face_instance, instance, {v(b.x(), b.y(), a.z()), v(a.x(), b.y(), a.z()), v(a.x(), b.y(), b.z()), v(b.x(), b.y(), b.z())});
  add_quad(s.mesh, s.face_instance, instance, {v(a.x(), b.y(), a.z()), v(a.x(), a.y(), a.z()), v(a.x(), a.y(), b.z()), v(a.x(), b.y(), b.z())});
}

/// Camera at `eye` looking at `target`, z-up world, OpenCV camera axes.
inline CameraPose look_at(FrameId id, const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double f, int width,
                          int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose p;
  p.frame_id = id;
  p.fx = p.fy = f;
  p.cx = width / 2.0;
  p.cy = height / 2.0;
  p.rotation.row(0) = right.transpose();
  p.rotation.row(1) = down.transpose();
  p.rotation.row(2) = forward.transpose();
  p.translation = -p.rotation * eye;
  return p;
}

inline std::array<Eigen::Vector3d, 8> corners(const Cuboid& c) {
  std::array<Eigen::Vector3d, 8> out;
  for (int i = 0; i < 8; ++i)
    out[static_cast<std::size_t>(i)] = {(i & 1) ? c.max.x() : c.min.x(), (i & 2) ? c.max.y() : c.min.y(),
                                        (i & 4) ? c.max.z() : c.min.z()};
  return out;
}

// Projected bounding box of all eight corners, when all lie in front of the camera.
inline std::optional<std::array<double, 4>> projected_box(const Cuboid& c, const CameraPose& pose) {
  std::array<double, 4> box = {1e300, 1e300, -1e300, -1e300};
  for (const auto& p : corners(c)) {
    const Eigen::Vector3d q = pose.to_camera(p);
    if (q.z() <= geometry::kNearPlane) return std::nullopt;
    const double u = pose.fx * q.x() / q.z() + pose.cx;
    const double v = pose.fy * q.y() / q.z() + pose.cy;
    box = {std::min(box[0], u), std::min(box[1], v), std::max(box[2], u), std::max(box[3], v)};
  }
  return box;
}

}  // namespace scene_detail

/// Label image: rasterized face buffer mapped through face -> instance (+1).
inline LabelImage render_labels(const SyntheticScene& scene, const FaceIndexBuffer& buffer) {
  LabelImage img{buffer.width(), buffer.height(), std::vector<std::uint16_t>(buffer.size(), 0)};
  for (std::size_t i = 0; i < buffer.size(); ++i)
    if (const auto f = buffer.at_index(i)) img.values[i] = static_cast<std::uint16_t>(scene.face_instance[*f] + 1);
  return img;
}

/// Flat-shaded colour render (Lambert with a fixed light, sky where no face).
inline RgbImage render_shaded(const SyntheticScene& scene, const FaceIndexBuffer& buffer) {
  const Eigen::Vector3d light = Eigen::Vector3d(0.4, 0.3, 0.85).normalized();
  RgbImage img{buffer.width(), buffer.height(), std::vector<std::uint8_t>(buffer.size() * 3)};
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    std::array<std::uint8_t, 3> rgb = {135, 180, 235};
    if (const auto f = buffer.at_index(i)) {
      const auto& face = scene.mesh.faces[*f];
      const auto& v = scene.mesh.vertices;
      const Eigen::Vector3d n = (v[face[1]] - v[face[0]]).cross(v[face[2]] - v[face[0]]).normalized();
      const double shade = 0.35 + 0.65 * std::abs(n.dot(light));
      const auto& base = scene.colors[scene.face_instance[*f]];
      for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(base[static_cast<std::size_t>(c)] * shade));
    }
    for (int c = 0; c < 3; ++c) img.rgb[3 * i + static_cast<std::size_t>(c)] = rgb[static_cast<std::size_t>(c)];
  }
  return img;
}

/// Builds a scene whose cuboids never overlap, project to at least 4 px in
/// both directions whenever they are in front of the camera, and are each
/// fully visible (in frame, unoccluded) in at least one frame. In clips of 8
/// or more frames the cuboids sit on a ring and each is absent from at least
/// one frame; shorter clips place them near the centre, present in every
/// frame. A cuboid first enters the view spanning at least
/// 4 px in both directions and never reappears showing only faces that no
/// earlier frame showed. Layouts that violate this are redrawn from the same
/// seeded stream.
inline SyntheticScene build_scene(const SceneSpec& spec) {
  using namespace scene_detail;
  spec.validate();
  const double r = spec.orbit_radius;
  const double focal = kFocalScale * std::min(spec.width, spec.height);

  std::vector<CameraPose> poses;
  for (int i = 0; i < spec.frame_count; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / spec.frame_count;
    const Eigen::Vector3d eye(r * std::cos(theta), r * std::sin(theta), kCameraHeight * r);
    poses.push_back(look_at(i, eye, Eigen::Vector3d::Zero(), focal, spec.width, spec.height));
  }

  const bool short_clip = spec.frame_count < kShortClipFrames;
  Rng layout_rng = Rng(spec.seed).split(0x6C61796FULL);
  for (int attempt = 0; attempt < kMaxLayoutAttempts; ++attempt) {
    SyntheticScene s;
    s.spec = spec;
    s.poses = poses;
    Rng color_rng = Rng(spec.seed).split(0x636F6CULL);
    s.colors.push_back({110, 110, 100});
    add_ground(s, 4.0 * r);

    bool placed_all = true;
    for (int k = 0; k < spec.object_count && placed_all; ++k) {
      bool placed = false;
      for (int tries = 0; tries < 500 && !placed; ++tries) {
        const double angle = layout_rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double radius = short_clip ? layout_rng.uniform(0.0, kCentrePlacement) * r
                                         : layout_rng.uniform(kMinPlacement, kMaxPlacement) * r;
        const double hx = layout_rng.uniform(0.05, 0.11) * r;
        const double hy = layout_rng.uniform(0.05, 0.11) * r;
        const double h = layout_rng.uniform(0.08, 0.25) * r;
        const Eigen::Vector3d c(radius * std::cos(angle), radius * std::sin(angle), 0.0);
        Cuboid box{c - Eigen::Vector3d(hx, hy, 0.0), c + Eigen::Vector3d(hx, hy, h)};
        const double margin = 0.05 * r;
        const bool overlaps = std::any_of(s.cuboids.begin(), s.cuboids.end(), [&](const Cuboid& o) {
          return box.min.x() < o.max.x() + margin && o.min.x() < box.max.x() + margin &&
                 box.min.y() < o.max.y() + margin && o.min.y() < box.max.y() + margin;
        });
        if (!overlaps) {
          s.cuboids.push_back(box);
          placed = true;
        }
      }
      placed_all = placed;
    }
    if (!placed_all) continue;

    for (std::size_t k = 0; k < s.cuboids.size(); ++k) {
      add_cuboid(s, static_cast<std::uint16_t>(k + 1), s.cuboids[k]);
      s.colors.push_back({static_cast<std::uint8_t>(60 + color_rng.uniform_index(180)),
                          static_cast<std::uint8_t>(60 + color_rng.uniform_index(180)),
                          static_cast<std::uint8_t>(60 + color_rng.uniform_index(180))});
    }

    // cheap projected-box pass before any rasterization
    bool ok = true;
    for (const auto& c : s.cuboids) {
      bool entered = false;
      bool fits = false;
      for (const auto& pose : s.poses) {
        const auto box = projected_box(c, pose);
        if (!box) continue;
        const auto& b = *box;
        if (std::min(b[2] - b[0], b[3] - b[1]) < kMinProjectedExtent) ok = false;
        const double cw = std::min<double>(b[2], spec.width) - std::max(b[0], 0.0);
        const double ch = std::min<double>(b[3], spec.height) - std::max(b[1], 0.0);
        if (!entered && cw > 0 && ch > 0) {
          entered = true;
          if (std::min(cw, ch) < kMinProjectedExtent) ok = false;
        }
        fits = fits || (b[0] >= 0 && b[1] >= 0 && b[2] <= spec.width && b[3] <= spec.height);
      }
      ok = ok && fits;
    }
    if (!ok) continue;

    std::vector<bool> fully_visible(s.cuboids.size(), false);
    std::vector<bool> absent(s.cuboids.size(), false);
    std::vector<FaceSet> seen_faces(s.cuboids.size() + 1);
    for (const auto& pose : s.poses) {
      if (!ok) break;
      const auto buffer = rasterize(s.mesh, pose, spec.width, spec.height);
      std::vector<std::size_t> visible(s.cuboids.size() + 1, 0);
      std::vector<FaceSet> faces(s.cuboids.size() + 1);
      std::vector<std::array<int, 4>> extent(s.cuboids.size() + 1, {spec.width, spec.height, -1, -1});
      for (std::size_t i = 0; i < buffer.size(); ++i)
        if (const auto f = buffer.at_index(i)) {
          const auto k = s.face_instance[*f];
          ++visible[k];
          faces[k].insert(*f);
          const int x = static_cast<int>(i % static_cast<std::size_t>(spec.width));
          const int y = static_cast<int>(i / static_cast<std::size_t>(spec.width));
          auto& e = extent[k];
          e = {std::min(e[0], x), std::min(e[1], y), std::max(e[2], x), std::max(e[3], y)};
        }
      for (std::size_t k = 0; k < s.cuboids.size(); ++k) {
        if (visible[k + 1] == 0) absent[k] = true;
        auto& known = seen_faces[k + 1];
        // a first appearance must span at least 4 px in both directions
        const auto& e = extent[k + 1];
        if (known.empty() && visible[k + 1] > 0 && std::min(e[2] - e[0], e[3] - e[1]) + 1 < kMinProjectedExtent) {
          ok = false;
          break;
        }
        // a reappearing cuboid must show at least one face observed earlier
        if (!known.empty() && !faces[k + 1].empty() &&
            std::none_of(faces[k + 1].begin(), faces[k + 1].end(), [&](std::uint32_t f) { return known.contains(f); })) {
          ok = false;
          break;
        }
        known |= faces[k + 1];
        const auto box = projected_box(s.cuboids[k], pose);
        if (box && std::min((*box)[2] - (*box)[0], (*box)[3] - (*box)[1]) < kMinProjectedExtent) {
          ok = false;
          break;
        }
        if (fully_visible[k] || !box || (*box)[0] < 0 || (*box)[1] < 0 || (*box)[2] > spec.width ||
            (*box)[3] > spec.height)
          continue;
        // unoccluded: all pixels of the instance rendered alone are visible in the scene
        TriangleMesh alone{s.mesh.vertices, {}};
        for (std::size_t f = 0; f < s.mesh.faces.size(); ++f)
          if (s.face_instance[f] == k + 1) alone.faces.push_back(s.mesh.faces[f]);
        fully_visible[k] = coverage(rasterize(alone, pose, spec.width, spec.height)).count() == visible[k + 1];
      }
    }
    auto all = [](const std::vector<bool>& v) { return std::all_of(v.begin(), v.end(), [](bool b) { return b; }); };
    const bool none_absent = std::none_of(absent.begin(), absent.end(), [](bool b) { return b; });
    if (ok && all(fully_visible) && (short_clip ? none_absent : all(absent))) return s;
  }
  throw ConfigError("synthetic scene: no valid layout found for seed " + std::to_string(spec.seed));
}

inline std::string frame_file_name(FrameId id, const char* extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d%s", id, extension);
  return buf;
}

/// Writes mesh.obj, poses.txt, frames/NNNNNN.png and labels/NNNNNN.png under `root`.
inline SyntheticScene generate(const SceneSpec& spec, const std::filesystem::path& root) {
  SyntheticScene scene = build_scene(spec);
  std::error_code ec;
  std::filesystem::create_directories(root / "frames", ec);
  if (!ec) std::filesystem::create_directories(root / "labels", ec);
  if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());
  write_obj(root / "mesh.obj", scene.mesh);
  write_poses(root / "poses.txt", scene.poses);
  for (const auto& pose : scene.poses) {
    const auto buffer = rasterize(scene.mesh, pose, spec.width, spec.height);
    write_rgb_png(root / "frames" / frame_file_name(pose.frame_id, ".png"), render_shaded(scene, buffer));
    write_label_png(root / "labels" / frame_file_name(pose.frame_id, ".png"), render_labels(scene, buffer));
  }
  return scene;
}

}  // namespace slp
