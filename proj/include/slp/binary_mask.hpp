#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slp/error.hpp"

namespace slp {

using FrameId = int;
using ObjectId = int;

struct Pixel {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Pixel, Pixel) = default;
  friend constexpr auto operator<=>(Pixel a, Pixel b) {
    // row-major order
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Width x height bitmap stored row-major, one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask(int width, int height) : width_(width), height_(height) {
    require(width > 0 && height > 0, "BinaryMask: dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }

  static BinaryMask full(int width, int height) {
    BinaryMask m(width, height);
    std::fill(m.bits_.begin(), m.bits_.end(), std::uint8_t{1});
    return m;
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }

  [[nodiscard]] bool contains(Pixel p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
  }

  [[nodiscard]] bool test(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  [[nodiscard]] bool test(Pixel p) const noexcept { return test(p.x, p.y); }
  void set(int x, int y, bool value = true) noexcept { bits_[index(x, y)] = value ? 1 : 0; }
  void set(Pixel p, bool value = true) noexcept { set(p.x, p.y, value); }

  [[nodiscard]] bool test_index(std::size_t i) const noexcept { return bits_[i] != 0; }
  void set_index(std::size_t i, bool value = true) noexcept { bits_[i] = value ? 1 : 0; }

  [[nodiscard]] std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  [[nodiscard]] bool empty() const noexcept {
    return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
  }

  [[nodiscard]] bool same_shape(const BinaryMask& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// In-place union.
  BinaryMask& operator|=(const BinaryMask& other) {
    check_shape(other, "union");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
    return *this;
  }

  /// Every set pixel of this mask is also set in `other`.
  [[nodiscard]] bool subset_of(const BinaryMask& other) const {
    check_shape(other, "subset");
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i]) return false;
    return true;
  }

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

  void check_shape(const BinaryMask& other, const char* op) const {
    if (!same_shape(other))
      throw ContractViolation(std::string("BinaryMask ") + op + ": dimension mismatch (" +
                              std::to_string(width_) + "x" + std::to_string(height_) + " vs " +
                              std::to_string(other.width_) + "x" + std::to_string(other.height_) +
                              ")");
  }

 private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

inline BinaryMask operator|(BinaryMask a, const BinaryMask& b) {
  a |= b;
  return a;
}

/// |a ∩ b| / |a ∪ b|, 0 when both are empty.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  a.check_shape(b, "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto& x = a.bytes();
  const auto& y = b.bytes();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += static_cast<std::size_t>(x[i] & y[i]);
    uni += static_cast<std::size_t>(x[i] | y[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace slp
