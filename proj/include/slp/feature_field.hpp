#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"

namespace slp {

/// An object's characteristic visual descriptor: a unit-norm embedding vector.
using Feature = std::vector<float>;

inline void normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq <= 0.0) throw ContractViolation("normalize: zero-norm feature vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "dot: feature dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

/// Per-pixel unit embedding vectors for one frame, row-major and vector-contiguous.
class FeatureField {
 public:
  /// Takes raw vectors and L2-normalizes each one.
  FeatureField(int width, int height, int dim, std::vector<float> values)
      : width_(width), height_(height), dim_(dim), values_(std::move(values)) {
    require(width > 0 && height > 0 && dim > 0, "FeatureField: dimensions must be positive");
    require(values_.size() == static_cast<std::size_t>(width) * height * dim,
            "FeatureField: value count does not match width*height*dim");
    for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) normalize(mutable_at(i));
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }

  [[nodiscard]] std::span<const float> at(int x, int y) const noexcept {
    return at(static_cast<std::size_t>(y) * width_ + x);
  }
  [[nodiscard]] std::span<const float> at(Pixel p) const noexcept { return at(p.x, p.y); }
  [[nodiscard]] std::span<const float> at(std::size_t pixel) const noexcept {
    return {values_.data() + pixel * dim_, static_cast<std::size_t>(dim_)};
  }

  /// Cosine score of `feature` against the vector at pixel `pixel`.
  [[nodiscard]] double score(std::span<const float> feature, std::size_t pixel) const {
    return dot(feature, at(pixel));
  }

  [[nodiscard]] const std::vector<float>& values() const noexcept { return values_; }

 private:
  std::span<float> mutable_at(std::size_t pixel) noexcept {
    return {values_.data() + pixel * dim_, static_cast<std::size_t>(dim_)};
  }

  int width_;
  int height_;
  int dim_;
  std::vector<float> values_;
};

/// Renormalized mean of the field vectors at `points`.
inline Feature mean_feature(const FeatureField& field, std::span<const Pixel> points) {
  require(!points.empty(), "mean_feature: no points");
  Feature out(static_cast<std::size_t>(field.dim()), 0.0f);
  for (const Pixel& p : points) {
    const auto v = field.at(p);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  normalize(out);
  return out;
}

/// Contents of an `SLPE` embedding file before normalization.
struct RawEmbedding {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;
};

namespace slpe {

inline constexpr std::array<char, 4> kMagic = {'S', 'L', 'P', 'E'};
inline constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace slpe

/// Layout: magic `SLPE`, little-endian u32 version/width/height/dim, then
/// width*height*dim little-endian float32, row-major, vector-contiguous.
inline void write_slpe(const std::filesystem::path& path, const RawEmbedding& e) {
  require(e.values.size() == static_cast<std::size_t>(e.width) * e.height * e.dim,
          "write_slpe: value count does not match header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(slpe::kMagic.data(), 4);
  slpe::put_u32(out, slpe::kVersion);
  slpe::put_u32(out, e.width);
  slpe::put_u32(out, e.height);
  slpe::put_u32(out, e.dim);
  for (float v : e.values) slpe::put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_slpe(const std::filesystem::path& path, const FeatureField& field) {
  write_slpe(path, RawEmbedding{static_cast<std::uint32_t>(field.width()),
                                static_cast<std::uint32_t>(field.height()),
                                static_cast<std::uint32_t>(field.dim()), field.values()});
}

inline RawEmbedding read_slpe_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  unsigned char header[20];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) throw IoError(path.string() + ": truncated header");
  if (!std::equal(slpe::kMagic.begin(), slpe::kMagic.end(), reinterpret_cast<const char*>(header)))
    throw IoError(path.string() + ": bad magic");
  const auto version = slpe::get_u32(header + 4);
  if (version != slpe::kVersion) throw IoError(path.string() + ": unsupported version " + std::to_string(version));
  RawEmbedding e{slpe::get_u32(header + 8), slpe::get_u32(header + 12), slpe::get_u32(header + 16), {}};
  if (e.width == 0 || e.height == 0 || e.dim == 0) throw IoError(path.string() + ": zero dimension");
  const std::size_t n = static_cast<std::size_t>(e.width) * e.height * e.dim;
  std::vector<unsigned char> bytes(n * 4);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError(path.string() + ": truncated payload");
  e.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.values[i] = std::bit_cast<float>(slpe::get_u32(bytes.data() + 4 * i));
  return e;
}

inline FeatureField read_slpe(const std::filesystem::path& path) {
  auto raw = read_slpe_raw(path);
  try {
    return FeatureField(static_cast<int>(raw.width), static_cast<int>(raw.height), static_cast<int>(raw.dim),
                        std::move(raw.values));
  } catch (const ContractViolation& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace slp
