#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"

namespace slp {

/// Undistorted pinhole camera. `rotation` and `translation` map world to
/// camera coordinates (x right, y down, z forward). Pixel (i, j) has its
/// centre at image coordinates (i + 0.5, j + 0.5).
struct CameraPose {
  FrameId frame_id = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const {
    require(fx > 0.0 && fy > 0.0, "CameraPose: focal lengths must be positive");
    const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    require(ortho <= 1e-6, "CameraPose: rotation is not orthonormal");
    require(std::abs(rotation.determinant() - 1.0) <= 1e-6, "CameraPose: rotation determinant is not +1");
  }

  [[nodiscard]] Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }

  [[nodiscard]] Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Camera-space direction (z = 1) of the ray through image point (u, v).
  [[nodiscard]] Eigen::Vector3d ray(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
};

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;

  [[nodiscard]] std::size_t face_count() const noexcept { return faces.size(); }

  [[nodiscard]] double face_area(std::size_t f) const {
    const auto& [a, b, c] = faces[f];
    return 0.5 * (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]).norm();
  }

  void validate() const {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (auto v : faces[f])
        require(v < vertices.size(), "TriangleMesh: face " + std::to_string(f) + " references vertex " +
                                         std::to_string(v) + " of " + std::to_string(vertices.size()));
      require(face_area(f) > 0.0, "TriangleMesh: face " + std::to_string(f) + " is degenerate");
    }
  }
};

/// Set of mesh face indices owned by an object.
class FaceSet {
 public:
  FaceSet() = default;
  FaceSet(std::initializer_list<std::uint32_t> faces) : faces_(faces) {}

  void insert(std::uint32_t f) { faces_.insert(f); }
  void erase(std::uint32_t f) { faces_.erase(f); }
  [[nodiscard]] bool contains(std::uint32_t f) const { return faces_.contains(f); }
  [[nodiscard]] std::size_t size() const noexcept { return faces_.size(); }
  [[nodiscard]] bool empty() const noexcept { return faces_.empty(); }
  [[nodiscard]] auto begin() const { return faces_.begin(); }
  [[nodiscard]] auto end() const { return faces_.end(); }

  FaceSet& operator|=(const FaceSet& other) {
    faces_.insert(other.faces_.begin(), other.faces_.end());
    return *this;
  }
  FaceSet& operator-=(const FaceSet& other) {
    for (auto f : other.faces_) faces_.erase(f);
    return *this;
  }
  [[nodiscard]] bool subset_of(const FaceSet& other) const {
    for (auto f : faces_)
      if (!other.contains(f)) return false;
    return true;
  }

  friend bool operator==(const FaceSet&, const FaceSet&) = default;

 private:
  std::set<std::uint32_t> faces_;
};

/// Per-pixel index of the visible mesh face; absent where no face is seen.
class FaceIndexBuffer {
 public:
  static constexpr std::int32_t kNone = -1;

  FaceIndexBuffer(int width, int height) : width_(width), height_(height) {
    require(width > 0 && height > 0, "FaceIndexBuffer: dimensions must be positive");
    entries_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), kNone);
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  [[nodiscard]] std::optional<std::uint32_t> at(int x, int y) const noexcept {
    return at_index(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x));
  }
  [[nodiscard]] std::optional<std::uint32_t> at_index(std::size_t i) const noexcept {
    const auto e = entries_[i];
    if (e == kNone) return std::nullopt;
    return static_cast<std::uint32_t>(e);
  }
  void set(int x, int y, std::optional<std::uint32_t> face) noexcept {
    entries_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] =
        face ? static_cast<std::int32_t>(*face) : kNone;
  }

  [[nodiscard]] const std::vector<std::int32_t>& raw() const noexcept { return entries_; }

  friend bool operator==(const FaceIndexBuffer&, const FaceIndexBuffer&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::int32_t> entries_;
};

namespace geometry {

/// Intersections closer than this (camera-space z) are ignored.
inline constexpr double kNearPlane = 1e-6;
/// Depths closer than this are ties; the lower face index wins.
inline constexpr double kDepthTie = 1e-9;

namespace detail {

struct ScreenVertex {
  double u;
  double v;
};

// Top-left style tie rule: each shared edge belongs to exactly one of the two
// triangles that traverse it in opposite directions.
inline bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.u - a.u;
  const double dy = b.v - a.v;
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

inline double edge(const ScreenVertex& a, const ScreenVertex& b, double u, double v) {
  return (b.u - a.u) * (v - a.v) - (b.v - a.v) * (u - a.u);
}

// Sutherland-Hodgman against z >= kNearPlane.
inline std::vector<Eigen::Vector3d> clip_near(const std::array<Eigen::Vector3d, 3>& tri) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(4);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& cur = tri[i];
    const auto& nxt = tri[(i + 1) % 3];
    const bool cur_in = cur.z() >= kNearPlane;
    const bool nxt_in = nxt.z() >= kNearPlane;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double s = (kNearPlane - cur.z()) / (nxt.z() - cur.z());
      Eigen::Vector3d p = cur + s * (nxt - cur);
      p.z() = kNearPlane;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace detail
}  // namespace geometry

/// Z-buffer rasterization of face indices: every pixel gets the nearest face
/// whose projection covers the pixel centre. No back-face culling.
inline FaceIndexBuffer rasterize(const TriangleMesh& mesh, const CameraPose& pose, int width, int height) {
  using geometry::detail::ScreenVertex;
  pose.validate();
  require(width > 0 && height > 0, "rasterize: frame dimensions must be positive");

  FaceIndexBuffer buffer(width, height);
  std::vector<double> depth(buffer.size(), std::numeric_limits<double>::infinity());

  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (auto v : face) require(v < mesh.vertices.size(), "rasterize: face references missing vertex");
    const std::array<Eigen::Vector3d, 3> cam = {pose.to_camera(mesh.vertices[face[0]]),
                                                pose.to_camera(mesh.vertices[face[1]]),
                                                pose.to_camera(mesh.vertices[face[2]])};
    const Eigen::Vector3d normal = (cam[1] - cam[0]).cross(cam[2] - cam[0]);
    if (normal.squaredNorm() == 0.0) continue;
    const double offset = normal.dot(cam[0]);

    const auto poly = geometry::detail::clip_near(cam);
    if (poly.size() < 3) continue;
    std::vector<ScreenVertex> screen;
    screen.reserve(poly.size());
    for (const auto& p : poly) screen.push_back({pose.fx * p.x() / p.z() + pose.cx, pose.fy * p.y() / p.z() + pose.cy});

    for (std::size_t t = 1; t + 1 < screen.size(); ++t) {
      ScreenVertex a = screen[0];
      ScreenVertex b = screen[t];
      ScreenVertex c = screen[t + 1];
      const double area2 = geometry::detail::edge(a, b, c.u, c.v);
      if (area2 == 0.0 || !std::isfinite(area2)) continue;
      if (area2 < 0.0) std::swap(b, c);

      const double min_u = std::min({a.u, b.u, c.u});
      const double max_u = std::max({a.u, b.u, c.u});
      const double min_v = std::min({a.v, b.v, c.v});
      const double max_v = std::max({a.v, b.v, c.v});
      // pixel centres inside the bounding box, clamped before the int conversion
      auto first = [](double lo, int n) { return static_cast<int>(std::clamp(std::ceil(lo - 0.5), 0.0, double(n))); };
      auto last = [](double hi, int n) { return static_cast<int>(std::clamp(std::floor(hi - 0.5), -1.0, double(n - 1))); };
      const int x0 = first(min_u, width);
      const int x1 = last(max_u, width);
      const int y0 = first(min_v, height);
      const int y1 = last(max_v, height);

      const bool own_ab = geometry::detail::owns_edge(a, b);
      const bool own_bc = geometry::detail::owns_edge(b, c);
      const bool own_ca = geometry::detail::owns_edge(c, a);

      for (int y = y0; y <= y1; ++y) {
        const double v = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
          const double u = x + 0.5;
          const double e0 = geometry::detail::edge(a, b, u, v);
          const double e1 = geometry::detail::edge(b, c, u, v);
          const double e2 = geometry::detail::edge(c, a, u, v);
          if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
          if ((e0 == 0.0 && !own_ab) || (e1 == 0.0 && !own_bc) || (e2 == 0.0 && !own_ca)) continue;

          const double denom = normal.dot(pose.ray(u, v));
          if (denom == 0.0) continue;
          const double z = offset / denom;
          if (!(z >= geometry::kNearPlane)) continue;
          const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
          if (z < depth[i] - geometry::kDepthTie) {
            depth[i] = z;
            buffer.set(x, y, static_cast<std::uint32_t>(f));
          }
        }
      }
    }
  }
  return buffer;
}

/// Pixels whose visible face belongs to `faces`.
inline BinaryMask pixels_of_faces(const FaceIndexBuffer& buffer, const FaceSet& faces) {
  BinaryMask mask(buffer.width(), buffer.height());
  if (faces.empty()) return mask;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto f = buffer.at_index(i);
    if (f && faces.contains(*f)) mask.set_index(i);
  }
  return mask;
}

/// Distinct visible faces under the set pixels of `mask`.
inline FaceSet faces_of_pixels(const FaceIndexBuffer& buffer, const BinaryMask& mask) {
  if (mask.width() != buffer.width() || mask.height() != buffer.height())
    throw ContractViolation("faces_of_pixels: mask and buffer dimensions differ");
  FaceSet faces;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    if (!mask.test_index(i)) continue;
    if (const auto f = buffer.at_index(i)) faces.insert(*f);
  }
  return faces;
}

/// Presence map of a buffer: pixels that observe any face.
inline BinaryMask coverage(const FaceIndexBuffer& buffer) {
  BinaryMask mask(buffer.width(), buffer.height());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    if (buffer.at_index(i)) mask.set_index(i);
  return mask;
}

}  // namespace slp
