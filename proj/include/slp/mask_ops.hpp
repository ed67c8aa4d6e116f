#pragma once

#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"

namespace slp {

namespace detail {

// One separable pass of a square structuring element along rows (horizontal)
// or columns. `dilate` picks max vs min; `outside` is the value assumed for
// out-of-frame neighbours.
inline BinaryMask square_pass(const BinaryMask& in, int radius, bool horizontal, bool dilate,
                              bool outside) {
  const int w = in.width();
  const int h = in.height();
  BinaryMask out(w, h);
  const int lines = horizontal ? h : w;
  const int length = horizontal ? w : h;
  auto at = [&](int line, int pos) {
    return horizontal ? in.test(pos, line) : in.test(line, pos);
  };
  for (int line = 0; line < lines; ++line) {
    for (int pos = 0; pos < length; ++pos) {
      bool acc = !dilate;
      for (int d = -radius; d <= radius; ++d) {
        const int q = pos + d;
        const bool v = (q < 0 || q >= length) ? outside : at(line, q);
        if (dilate ? v : !v) {
          acc = dilate;
          break;
        }
      }
      if (horizontal)
        out.set(pos, line, acc);
      else
        out.set(line, pos, acc);
    }
  }
  return out;
}

inline int kernel_radius(int kernel_side) {
  if (kernel_side < 3 || kernel_side % 2 == 0)
    throw ContractViolation("morphology: kernel side must be odd and >= 3, got " +
                            std::to_string(kernel_side));
  return kernel_side / 2;
}

}  // namespace detail

/// Dilation by a kernel_side x kernel_side square. Out-of-frame pixels count as unset.
inline BinaryMask dilate(const BinaryMask& mask, int kernel_side) {
  const int r = detail::kernel_radius(kernel_side);
  return detail::square_pass(detail::square_pass(mask, r, true, true, false), r, false, true,
                             false);
}

/// Erosion by a kernel_side x kernel_side square. Out-of-frame pixels count as
/// set, so the frame border itself never erodes a region.
inline BinaryMask erode(const BinaryMask& mask, int kernel_side) {
  const int r = detail::kernel_radius(kernel_side);
  return detail::square_pass(detail::square_pass(mask, r, true, false, true), r, false, false,
                             true);
}

/// `iterations` repetitions of dilate-then-erode. Extensive: no set pixel is lost.
inline BinaryMask closing(const BinaryMask& mask, int kernel_side, int iterations) {
  detail::kernel_radius(kernel_side);
  require(iterations >= 1, "closing: iterations must be >= 1");
  BinaryMask out = mask;
  for (int i = 0; i < iterations; ++i) out = erode(dilate(out, kernel_side), kernel_side);
  return out;
}

/// Candidate single-pixel prompts for new-object discovery, row-major.
struct PromptGrid {
  int side = 0;
  std::vector<Pixel> points;
};

/// side x side points at the cell centres of a uniform partition of the frame.
inline PromptGrid make_prompt_grid(int side, int width, int height) {
  require(side >= 1, "prompt grid: side must be >= 1");
  require(width > 0 && height > 0, "prompt grid: frame dimensions must be positive");
  PromptGrid grid{side, {}};
  grid.points.reserve(static_cast<std::size_t>(side) * static_cast<std::size_t>(side));
  for (int gy = 0; gy < side; ++gy) {
    const int y = static_cast<int>((2L * gy + 1) * height / (2L * side));
    for (int gx = 0; gx < side; ++gx) {
      const int x = static_cast<int>((2L * gx + 1) * width / (2L * side));
      grid.points.push_back({x, y});
    }
  }
  return grid;
}

/// Keeps the points whose seen-mask bit is unset, in their original order.
inline PromptGrid filter_prompts(const PromptGrid& grid, const BinaryMask& seen) {
  PromptGrid kept{grid.side, {}};
  for (const Pixel& p : grid.points) {
    require(seen.contains(p), "filter_prompts: grid point out of frame");
    if (!seen.test(p)) kept.points.push_back(p);
  }
  return kept;
}

}  // namespace slp
