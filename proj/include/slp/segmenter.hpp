#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"
#include "slp/feature_field.hpp"
#include "slp/mask_ops.hpp"

namespace slp {

/// One or more pixel locations given to the segmenter to elicit a mask.
struct Prompt {
  std::vector<Pixel> points;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// A newly discovered segment together with the prompt that produced it.
struct SegmentProposal {
  BinaryMask mask;
  Prompt prompt;
  std::optional<Feature> feature;  // prompt-site vector, when an encoding was supplied
};

/// Promptable segmenter bound to one video.
///
/// Implementations are pure functions of (bound dataset, arguments) and must
/// tolerate concurrent const calls.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  /// Frame ids of the bound video in playback order.
  [[nodiscard]] virtual std::vector<FrameId> frames() const = 0;
  [[nodiscard]] virtual int width() const = 0;
  [[nodiscard]] virtual int height() const = 0;

  /// Per-pixel unit embedding for a frame. Throws NotFound for unknown frames.
  [[nodiscard]] virtual FeatureField encode_image(FrameId frame) const = 0;

  /// Mask of the segment selected by `prompt`. Throws NotFound for unknown frames.
  [[nodiscard]] virtual BinaryMask get_mask(FrameId frame, const Prompt& prompt) const = 0;

  void check_prompt(const Prompt& prompt) const {
    require(!prompt.points.empty(), "Prompt: needs at least one point");
    for (const Pixel& p : prompt.points)
      require(p.x >= 0 && p.y >= 0 && p.x < width() && p.y < height(), "Prompt: point out of frame");
  }
};

inline constexpr double kDefaultDedupIou = 0.9;

/// Greedy deduplication: visit by descending mask area (stable on ties) and
/// drop anything with IoU above `max_iou` against an already kept proposal.
inline std::vector<SegmentProposal> deduplicate(std::vector<SegmentProposal> proposals, double max_iou) {
  std::vector<std::size_t> area(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) area[i] = proposals[i].mask.count();
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return area[a] > area[b]; });

  std::vector<SegmentProposal> kept;
  for (std::size_t i : order) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const SegmentProposal& k) {
      return iou(k.mask, proposals[i].mask) > max_iou;
    });
    if (!duplicate) kept.push_back(std::move(proposals[i]));
  }
  return kept;
}

/// New-object discovery: query every grid point outside `seen`, drop empty
/// masks and masks already covered by `seen`, then deduplicate. When `field`
/// is given each proposal carries the vector at its prompt point.
inline std::vector<SegmentProposal> get_masks(const Segmenter& segmenter, FrameId frame, const BinaryMask& seen,
                                              const PromptGrid& grid, const FeatureField* field = nullptr,
                                              double max_iou = kDefaultDedupIou) {
  require(seen.width() == segmenter.width() && seen.height() == segmenter.height(),
          "get_masks: seen mask dimensions differ from frame");
  std::vector<SegmentProposal> raw;
  for (const Pixel& p : filter_prompts(grid, seen).points) {
    Prompt prompt{{p}};
    BinaryMask mask = segmenter.get_mask(frame, prompt);
    if (mask.empty() || !mask.test(p) || mask.subset_of(seen)) continue;
    std::optional<Feature> feature;
    if (field) {
      const auto v = field->at(p);
      feature = Feature(v.begin(), v.end());
    }
    raw.push_back({std::move(mask), std::move(prompt), std::move(feature)});
  }
  return deduplicate(std::move(raw), max_iou);
}

}  // namespace slp
