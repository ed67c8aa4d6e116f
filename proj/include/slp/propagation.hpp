#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"
#include "slp/feature_field.hpp"
#include "slp/mask_ops.hpp"
#include "slp/rng.hpp"
#include "slp/scene_geometry.hpp"
#include "slp/segmenter.hpp"

namespace slp {

/// FIND_OBJECT strategy.
///   sam-only-1  visual features, k-best prompt over all pixels
///   sam-only-2  visual features, hill-climb from the last prompt
///   sfm-sam-1   mesh faces + visual k-best over the matching set
///   sfm-sam-2   mesh faces, k random prompts from the matching set
enum class Variant { SamOnly1, SamOnly2, SfmSam1, SfmSam2 };

inline constexpr std::array<Variant, 4> kAllVariants = {Variant::SamOnly1, Variant::SamOnly2, Variant::SfmSam1,
                                                        Variant::SfmSam2};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::SamOnly1: return "sam-only-1";
    case Variant::SamOnly2: return "sam-only-2";
    case Variant::SfmSam1: return "sfm-sam-1";
    case Variant::SfmSam2: return "sfm-sam-2";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  for (auto v : kAllVariants)
    if (to_string(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

inline bool uses_geometry(Variant v) { return v == Variant::SfmSam1 || v == Variant::SfmSam2; }
inline bool uses_visual_features(Variant v) { return v != Variant::SfmSam2; }

struct SlpConfig {
  Variant variant = Variant::SamOnly1;
  int k = 1;            // prompt size; ignored by sam-only-2
  int skip_frames = 0;  // F: frames skipped between new-object searches
  int grid_side = 32;   // g
  double threshold = 0.5;
  int kernel_side = 5;
  int iterations = 3;
  std::uint64_t seed = 0;
  double dedup_iou = kDefaultDedupIou;
  bool freeze_features = false;  // test harness: never update characteristic features

  void validate() const {
    if (skip_frames < 0) throw ConfigError("F must be >= 0");
    if (grid_side < 1) throw ConfigError("g must be >= 1");
    if (!(threshold >= -1.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [-1, 1]");
    if (variant != Variant::SamOnly2 && k < 1) throw ConfigError("k must be >= 1 for " + std::string(to_string(variant)));
    if (kernel_side < 3 || kernel_side % 2 == 0) throw ConfigError("kernel side must be odd and >= 3");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
  }
};

struct TrackedObject {
  ObjectId id = 0;
  std::optional<Feature> feature;
  std::optional<Prompt> last_prompt;
  FaceSet faces;
  std::map<FrameId, BinaryMask> history;
};

/// A successful FIND_OBJECT: the object mask and the prompt that produced it.
struct Detection {
  BinaryMask mask;
  Prompt prompt;
};

/// Discrete hill climb under 8-connectivity. Moves to the best neighbour
/// (row-major first on ties) while it strictly beats the current score; the
/// result is a local maximum. `score(Pixel) -> double`.
template <class ScoreFn>
Pixel hill_climb(ScoreFn&& score, Pixel start, int width, int height) {
  require(start.x >= 0 && start.y >= 0 && start.x < width && start.y < height, "hill_climb: start out of frame");
  Pixel current = start;
  double current_score = score(current);
  for (;;) {
    std::optional<Pixel> best;
    double best_score = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Pixel n{current.x + dx, current.y + dy};
        if (n.x < 0 || n.y < 0 || n.x >= width || n.y >= height) continue;
        const double s = score(n);
        if (!best || s > best_score) {
          best = n;
          best_score = s;
        }
      }
    }
    if (!best || !(best_score > current_score)) return current;
    current = *best;
    current_score = best_score;
  }
}

/// Indices of the k highest scores, best first; equal scores keep index order.
inline std::vector<std::size_t> k_best(const std::vector<double>& scores, int k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(order.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  order.resize(take);
  return order;
}

namespace detail {

inline Pixel pixel_at(std::size_t index, int width) {
  return {static_cast<int>(index % static_cast<std::size_t>(width)), static_cast<int>(index / static_cast<std::size_t>(width))};
}

// Scores `candidates` (row-major pixel indices), picks the k best, applies the
// threshold gate. Returns the prompt or nullopt when below threshold.
inline std::optional<Prompt> k_best_prompt(const FeatureField& field, const Feature& feature,
                                           const std::vector<std::size_t>& candidates, int k, double threshold) {
  if (candidates.empty()) return std::nullopt;
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = field.score(feature, candidates[i]);
  const auto best = k_best(scores, k);
  if (scores[best.front()] < threshold) return std::nullopt;
  Prompt prompt;
  for (auto i : best) prompt.points.push_back(pixel_at(candidates[i], field.width()));
  return prompt;
}

inline Feature prompt_feature(const FeatureField& field, const Prompt& prompt) {
  if (prompt.points.size() == 1) {
    const auto v = field.at(prompt.points.front());
    return Feature(v.begin(), v.end());
  }
  return mean_feature(field, prompt.points);
}

}  // namespace detail

/// Visual-only FIND_OBJECT. k > 0 scores every pixel and prompts with the k
/// best; k <= 0 hill-climbs from the last prompt. Below-threshold scores and
/// empty masks leave `obj` untouched and return nullopt. On success the
/// characteristic feature becomes the prompt-site vector (renormalized mean
/// for k > 1) and the prompt is remembered.
inline std::optional<Detection> find_object_sam_only(FrameId frame, TrackedObject& obj, const Segmenter& segmenter,
                                                     const FeatureField& field, int k, double threshold,
                                                     bool update_features = true) {
  require(obj.feature.has_value(), "find_object_sam_only: object has no visual feature");
  const Feature& feature = *obj.feature;

  std::optional<Prompt> prompt;
  if (k > 0) {
    std::vector<std::size_t> all(static_cast<std::size_t>(field.width()) * field.height());
    std::iota(all.begin(), all.end(), std::size_t{0});
    prompt = detail::k_best_prompt(field, feature, all, k, threshold);
  } else {
    if (!obj.last_prompt || obj.last_prompt->points.empty())
      throw ContractViolation("find_object_sam_only: hill-climb mode needs a last prompt");
    auto score = [&](Pixel p) { return dot(feature, field.at(p)); };
    const Pixel top = hill_climb(score, obj.last_prompt->points.front(), field.width(), field.height());
    if (score(top) >= threshold) prompt = Prompt{{top}};
  }
  if (!prompt) return std::nullopt;

  BinaryMask mask = segmenter.get_mask(frame, *prompt);
  if (mask.empty()) return std::nullopt;
  if (update_features) obj.feature = detail::prompt_feature(field, *prompt);
  obj.last_prompt = prompt;
  return Detection{std::move(mask), std::move(*prompt)};
}

/// Encodes the frame first, then behaves as the overload above.
inline std::optional<Detection> find_object_sam_only(FrameId frame, TrackedObject& obj, const Segmenter& segmenter,
                                                     int k, double threshold) {
  const FeatureField field = segmenter.encode_image(frame);
  return find_object_sam_only(frame, obj, segmenter, field, k, threshold);
}

/// Geometric FIND_OBJECT over the matching set (pixels that observe faces the
/// object owns). Random mode draws up to k distinct matching pixels, with no
/// score gate and no visual tracking. Otherwise the k best matching pixels by
/// visual score are used, gated by `threshold`. On success the face set drops
/// visible faces outside the mask and gains every visible face under it.
/// `field` is only consulted in non-random mode.
inline std::optional<Detection> find_object_sfm_sam(FrameId frame, TrackedObject& obj, const Segmenter& segmenter,
                                                    const FaceIndexBuffer& buffer,
                                                    const std::function<const FeatureField&()>& field, int k,
                                                    bool is_random, Rng& rng, double threshold,
                                                    bool update_features = true) {
  if (obj.faces.empty()) return std::nullopt;
  const BinaryMask obj_pixels = pixels_of_faces(buffer, obj.faces);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < obj_pixels.size(); ++i)
    if (obj_pixels.test_index(i)) candidates.push_back(i);
  if (candidates.empty()) return std::nullopt;

  Prompt prompt;
  if (is_random) {
    const std::size_t take = std::min(candidates.size(), static_cast<std::size_t>(std::max(k, 1)));
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      prompt.points.push_back(detail::pixel_at(candidates[i], buffer.width()));
    }
  } else {
    require(obj.feature.has_value(), "find_object_sfm_sam: object has no visual feature");
    const FeatureField& f = field();
    auto chosen = detail::k_best_prompt(f, *obj.feature, candidates, k, threshold);
    if (!chosen) return std::nullopt;
    prompt = std::move(*chosen);
  }

  BinaryMask mask = segmenter.get_mask(frame, prompt);
  if (mask.empty()) return std::nullopt;

  if (!is_random) {
    if (update_features) obj.feature = detail::prompt_feature(field(), prompt);
    obj.last_prompt = prompt;
  }

  BinaryMask outside = obj_pixels;
  for (std::size_t i = 0; i < outside.size(); ++i)
    if (mask.test_index(i)) outside.set_index(i, false);
  obj.faces -= faces_of_pixels(buffer, outside);
  obj.faces |= faces_of_pixels(buffer, mask);
  return Detection{std::move(mask), std::move(prompt)};
}

struct FrameTiming {
  FrameId frame = 0;
  double encode_ms = 0.0;
  double find_ms = 0.0;
  double discover_ms = 0.0;
};

struct SlpCounters {
  std::size_t get_masks_calls = 0;
  std::size_t find_object_calls = 0;
  std::size_t encode_calls = 0;
};

struct SlpResult {
  std::vector<TrackedObject> objects;  // ascending id
  std::vector<FrameTiming> timings;
  SlpCounters counters;
  double total_ms = 0.0;
};

/// Face-index buffers per frame; required by the sfm-sam variants.
using FrameBuffers = std::map<FrameId, FaceIndexBuffer>;

/// Optional hook called right before new-object discovery with the raw seen
/// mask, the closed seen mask, and the proposals that came back.
using DiscoveryObserver =
    std::function<void(FrameId, const BinaryMask& raw_seen, const BinaryMask& closed_seen,
                       const std::vector<SegmentProposal>& proposals)>;

/// Semantic label propagation over every frame of the segmenter's video.
///
/// Per frame: known objects are searched in ascending id and their masks
/// accumulate into the seen mask; when the skip counter has reached F the
/// closed seen mask filters the prompt grid and each surviving proposal
/// becomes a new object. Objects that are not found stay registered.
inline SlpResult run_slp(const Segmenter& segmenter, const SlpConfig& config, const FrameBuffers* geometry = nullptr,
                         const DiscoveryObserver& observer = {}) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  config.validate();
  if (uses_geometry(config.variant) && geometry == nullptr)
    throw ConfigError(std::string(to_string(config.variant)) + " requires scene geometry (mesh + poses)");

  const auto run_start = Clock::now();
  SlpResult result;
  const auto frames = segmenter.frames();
  if (frames.empty()) return result;

  const int width = segmenter.width();
  const int height = segmenter.height();
  const PromptGrid grid = make_prompt_grid(config.grid_side, width, height);
  const Rng root(config.seed);
  std::map<ObjectId, Rng> object_rngs;
  ObjectId next_id = 0;
  int skip_counter = 0;

  for (const FrameId frame : frames) {
    FrameTiming timing{frame};
    std::optional<FeatureField> field;
    auto field_for_frame = [&]() -> const FeatureField& {
      if (!field) {
        const auto t0 = Clock::now();
        field.emplace(segmenter.encode_image(frame));
        ++result.counters.encode_calls;
        timing.encode_ms += ms_since(t0);
      }
      return *field;
    };

    const FaceIndexBuffer* buffer = nullptr;
    if (uses_geometry(config.variant)) {
      const auto it = geometry->find(frame);
      if (it == geometry->end()) throw ConfigError("no face-index buffer for frame " + std::to_string(frame));
      buffer = &it->second;
    }

    BinaryMask seen(width, height);
    for (auto& obj : result.objects) {
      if (config.variant == Variant::SamOnly1 || config.variant == Variant::SamOnly2) field_for_frame();
      const auto t0 = Clock::now();
      ++result.counters.find_object_calls;
      std::optional<Detection> found;
      switch (config.variant) {
        case Variant::SamOnly1:
          found = find_object_sam_only(frame, obj, segmenter, *field, config.k, config.threshold, !config.freeze_features);
          break;
        case Variant::SamOnly2:
          found = find_object_sam_only(frame, obj, segmenter, *field, 0, config.threshold, !config.freeze_features);
          break;
        case Variant::SfmSam1:
        case Variant::SfmSam2:
          found = find_object_sfm_sam(frame, obj, segmenter, *buffer, field_for_frame, config.k,
                                      config.variant == Variant::SfmSam2, object_rngs.at(obj.id), config.threshold,
                                      !config.freeze_features);
          break;
      }
      timing.find_ms += ms_since(t0);
      if (found) {
        seen |= found->mask;
        obj.history.insert_or_assign(frame, std::move(found->mask));
      }
    }

    if (skip_counter >= config.skip_frames) {
      const FeatureField* proposal_field = uses_visual_features(config.variant) ? &field_for_frame() : nullptr;
      const auto t0 = Clock::now();
      const BinaryMask closed = closing(seen, config.kernel_side, config.iterations);
      ++result.counters.get_masks_calls;
      auto proposals = get_masks(segmenter, frame, closed, grid, proposal_field, config.dedup_iou);
      if (observer) observer(frame, seen, closed, proposals);
      for (auto& p : proposals) {
        TrackedObject obj;
        obj.id = next_id++;
        obj.feature = std::move(p.feature);
        obj.last_prompt = std::move(p.prompt);
        if (buffer) obj.faces = faces_of_pixels(*buffer, p.mask);
        obj.history.emplace(frame, std::move(p.mask));
        object_rngs.emplace(obj.id, root.split(static_cast<std::uint64_t>(obj.id)));
        result.objects.push_back(std::move(obj));
      }
      timing.discover_ms += ms_since(t0);
      skip_counter = 0;
    } else {
      ++skip_counter;
    }
    result.timings.push_back(timing);
  }
  result.total_ms = ms_since(run_start);
  return result;
}

}  // namespace slp
