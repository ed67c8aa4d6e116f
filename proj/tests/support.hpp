#pragma once

// Shared helpers and brute-force reference implementations for the tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "slp/binary_mask.hpp"
#include "slp/image_io.hpp"
#include "slp/oracle_segmenter.hpp"
#include "slp/propagation.hpp"
#include "slp/scene_geometry.hpp"
#include "slp/synthetic_scene.hpp"

namespace slp_test {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
      path_ = base / ("slp_test_" + std::to_string(rd()) + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <class Gen>
slp::BinaryMask random_mask(Gen& gen, int w, int h, double p) {
  std::bernoulli_distribution bit(p);
  slp::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, bit(gen));
  return m;
}

// Minkowski dilation: a pixel is set when any in-frame pixel of its
// neighbourhood is set.
inline slp::BinaryMask dilate_oracle(const slp::BinaryMask& m, int side) {
  const int r = side / 2;
  slp::BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      for (int dy = -r; dy <= r && !out.test(x, y); ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const slp::Pixel q{x + dx, y + dy};
          if (m.contains(q) && m.test(q)) {
            out.set(x, y);
            break;
          }
        }
  return out;
}

// Erosion: a pixel survives when no in-frame pixel of its neighbourhood is
// unset (the outside of the frame counts as set).
inline slp::BinaryMask erode_oracle(const slp::BinaryMask& m, int side) {
  const int r = side / 2;
  slp::BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const slp::Pixel q{x + dx, y + dy};
          if (m.contains(q) && !m.test(q)) {
            keep = false;
            break;
          }
        }
      out.set(x, y, keep);
    }
  return out;
}

inline slp::BinaryMask closing_oracle(slp::BinaryMask m, int side, int iterations) {
  for (int i = 0; i < iterations; ++i) m = erode_oracle(dilate_oracle(m, side), side);
  return m;
}

// Moller-Trumbore; returns the ray parameter of the hit.
inline std::optional<double> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                       const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                       const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  return e2.dot(q) * inv;
}

// Per-pixel nearest intersection along the ray through each pixel centre.
// The direction has unit camera-space z, so the ray parameter is depth.
inline slp::FaceIndexBuffer raycast_oracle(const slp::TriangleMesh& mesh, const slp::CameraPose& pose, int w,
                                           int h) {
  slp::FaceIndexBuffer out(w, h);
  const Eigen::Matrix3d rt = pose.rotation.transpose();
  const Eigen::Vector3d origin = pose.center();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d dir = rt * pose.ray(x + 0.5, y + 0.5);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const auto t =
            intersect(origin, dir, mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]);
        if (t && *t > slp::geometry::kNearPlane && *t < best - slp::geometry::kDepthTie) {
          best = *t;
          out.set(x, y, static_cast<std::uint32_t>(f));
        }
      }
    }
  return out;
}

// Camera at `eye` looking at `target`, OpenCV axes (x right, y down, z forward).
inline slp::CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double focal, int w,
                               int h) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up_hint = Eigen::Vector3d::UnitZ();
  if (std::abs(forward.dot(up_hint)) > 0.99) up_hint = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up_hint).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  slp::CameraPose pose;
  pose.fx = pose.fy = focal;
  pose.cx = w / 2.0;
  pose.cy = h / 2.0;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -pose.rotation * eye;
  return pose;
}

// Random triangles scattered in a box in front of a camera at the origin
// looking down +z; some straddle the near plane.
template <class Gen>
slp::TriangleMesh random_mesh(Gen& gen, int faces) {
  std::uniform_real_distribution<double> xy(-1.5, 1.5);
  std::uniform_real_distribution<double> z(-0.5, 4.0);
  std::uniform_real_distribution<double> jitter(-0.8, 0.8);
  slp::TriangleMesh mesh;
  while (static_cast<int>(mesh.faces.size()) < faces) {
    const Eigen::Vector3d centre(xy(gen), xy(gen), z(gen));
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int i = 0; i < 3; ++i) mesh.vertices.push_back(centre + Eigen::Vector3d(jitter(gen), jitter(gen), jitter(gen)));
    mesh.faces.push_back({base, base + 1, base + 2});
    if (mesh.face_area(mesh.faces.size() - 1) < 1e-3) {
      mesh.faces.pop_back();
      mesh.vertices.resize(base);
    }
  }
  return mesh;
}

inline slp::LabelImage label_image(int w, int h, std::uint16_t fill = 0) {
  slp::LabelImage img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  return img;
}

inline void fill_rect(slp::LabelImage& img, int x0, int y0, int x1, int y1, std::uint16_t value) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.values[static_cast<std::size_t>(y) * img.width + x] = value;
}

// Oracle masks with caller-supplied feature fields; counts mask queries.
class FieldSegmenter final : public slp::Segmenter {
 public:
  FieldSegmenter(std::map<slp::FrameId, slp::LabelImage> labels, std::map<slp::FrameId, slp::FeatureField> fields)
      : masks_(std::move(labels)), fields_(std::move(fields)) {}

  [[nodiscard]] std::vector<slp::FrameId> frames() const override { return masks_.frames(); }
  [[nodiscard]] int width() const override { return masks_.width(); }
  [[nodiscard]] int height() const override { return masks_.height(); }
  [[nodiscard]] slp::FeatureField encode_image(slp::FrameId frame) const override {
    const auto it = fields_.find(frame);
    if (it == fields_.end()) throw slp::NotFound("no field for frame " + std::to_string(frame));
    return it->second;
  }
  [[nodiscard]] slp::BinaryMask get_mask(slp::FrameId frame, const slp::Prompt& prompt) const override {
    ++mask_calls;
    return masks_.get_mask(frame, prompt);
  }

  mutable int mask_calls = 0;

 private:
  slp::OracleSegmenter masks_;
  std::map<slp::FrameId, slp::FeatureField> fields_;
};

// Field whose vector at each pixel is (s, sqrt(1 - s^2), 0, ...), so that
// scoring against e0 returns s. `score(x, y)` must lie in [-1, 1].
template <class ScoreFn>
slp::FeatureField score_field(int w, int h, int dim, ScoreFn&& score) {
  std::vector<float> values(static_cast<std::size_t>(w) * h * dim, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double s = score(x, y);
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * dim;
      values[base] = static_cast<float>(s);
      values[base + 1] = static_cast<float>(std::sqrt(std::max(0.0, 1.0 - s * s)));
    }
  return slp::FeatureField(w, h, dim, std::move(values));
}

inline slp::Feature unit_axis(int dim, int axis = 0) {
  slp::Feature f(static_cast<std::size_t>(dim), 0.0f);
  f[static_cast<std::size_t>(axis)] = 1.0f;
  return f;
}

// Brute-force argmax, first in row-major order on ties.
template <class ScoreFn>
slp::Pixel exhaustive_argmax(ScoreFn&& score, int w, int h) {
  slp::Pixel best{0, 0};
  double best_score = score(best);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (const double s = score(slp::Pixel{x, y}); s > best_score) {
        best = {x, y};
        best_score = s;
      }
  return best;
}

// In-memory renders of a synthetic scene, keyed by frame id.
struct RenderedScene {
  slp::SyntheticScene scene;
  slp::FrameBuffers buffers;
  std::map<slp::FrameId, slp::LabelImage> labels;
};

inline RenderedScene render(const slp::SceneSpec& spec) {
  RenderedScene out{slp::build_scene(spec), {}, {}};
  for (const auto& pose : out.scene.poses) {
    auto buffer = slp::rasterize(out.scene.mesh, pose, spec.width, spec.height);
    out.labels.emplace(pose.frame_id, slp::render_labels(out.scene, buffer));
    out.buffers.emplace(pose.frame_id, std::move(buffer));
  }
  return out;
}

inline slp::SceneSpec acceptance_spec() {
  slp::SceneSpec spec;
  spec.seed = 7;
  spec.object_count = 5;
  spec.frame_count = 60;
  spec.width = 128;
  spec.height = 128;
  return spec;
}

}  // namespace slp_test
