#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "slp/error.hpp"
#include "slp/feature_field.hpp"
#include "slp/image_io.hpp"
#include "slp/rng.hpp"
#include "slp/segmenter.hpp"

namespace slp {

struct OracleOptions {
  int dim = 32;
  /// Per-component standard deviation of the Gaussian noise added to the
  /// instance vector before renormalizing.
  double sigma = 0.05;
  std::uint64_t seed = 0;
  /// Pairwise cosine bound for instance vectors when labels outnumber dimensions.
  double max_instance_cosine = 0.3;
};

/// Ground-truth-backed segmenter.
///
/// Masks are exact instance masks from the label images. Features are a
/// seeded random unit vector per instance (label value 0 has its own),
/// perturbed per pixel by seeded Gaussian noise and renormalized.
class OracleSegmenter final : public Segmenter {
 public:
  OracleSegmenter(std::map<FrameId, LabelImage> labels, OracleOptions options = {})
      : labels_(std::move(labels)), options_(options) {
    require(!labels_.empty(), "OracleSegmenter: no frames");
    require(options_.dim > 0, "OracleSegmenter: dim must be positive");
    require(options_.sigma >= 0.0, "OracleSegmenter: sigma must be non-negative");
    const auto& first = labels_.begin()->second;
    width_ = first.width;
    height_ = first.height;
    std::uint16_t max_label = 0;
    for (const auto& [id, img] : labels_) {
      if (img.width != width_ || img.height != height_)
        throw ContractViolation("OracleSegmenter: frame " + std::to_string(id) + " has different dimensions");
      for (auto v : img.values) max_label = std::max(max_label, v);
    }
    draw_instance_vectors(max_label);
  }

  [[nodiscard]] std::vector<FrameId> frames() const override {
    std::vector<FrameId> ids;
    for (const auto& [id, img] : labels_) ids.push_back(id);
    return ids;
  }
  [[nodiscard]] int width() const override { return width_; }
  [[nodiscard]] int height() const override { return height_; }

  [[nodiscard]] FeatureField encode_image(FrameId frame) const override {
    const LabelImage& img = label_image(frame);
    const auto d = static_cast<std::size_t>(options_.dim);
    Rng noise = Rng(options_.seed).split(0x6E6F697365ULL).split(static_cast<std::uint64_t>(frame));
    std::vector<float> values(img.values.size() * d);
    for (std::size_t px = 0; px < img.values.size(); ++px) {
      const Feature& base = instance_vectors_[img.values[px]];
      for (std::size_t i = 0; i < d; ++i)
        values[px * d + i] = static_cast<float>(base[i] + options_.sigma * noise.normal());
    }
    return FeatureField(width_, height_, options_.dim, std::move(values));
  }

  /// Instance mask of the label held by the majority of prompt points
  /// (lowest label on ties). Points on unlabeled pixels do not vote; a
  /// prompt with no labeled point yields an empty mask.
  [[nodiscard]] BinaryMask get_mask(FrameId frame, const Prompt& prompt) const override {
    const LabelImage& img = label_image(frame);
    check_prompt(prompt);
    std::map<std::uint16_t, int> votes;
    for (const Pixel& p : prompt.points)
      if (const auto v = img.at(p); v != 0) ++votes[v];
    if (votes.empty()) return BinaryMask(width_, height_);
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it)
      if (it->second > best->second) best = it;
    return img.mask_of(best->first);
  }

  /// Base unit vector for a label value (0 = unlabeled background).
  [[nodiscard]] const Feature& instance_vector(std::uint16_t label) const { return instance_vectors_.at(label); }
  [[nodiscard]] const LabelImage& label_image(FrameId frame) const {
    const auto it = labels_.find(frame);
    if (it == labels_.end()) throw NotFound("oracle segmenter: unknown frame " + std::to_string(frame));
    return it->second;
  }
  [[nodiscard]] const OracleOptions& options() const noexcept { return options_; }

 private:
  // Gram-Schmidt on seeded Gaussian draws while the labels fit in `dim`
  // dimensions; beyond that, rejection sampling against max_instance_cosine.
  void draw_instance_vectors(std::uint16_t max_label) {
    Rng rng = Rng(options_.seed).split(0x696E7374ULL);
    const auto d = static_cast<std::size_t>(options_.dim);
    constexpr int kMaxAttempts = 10000;
    for (std::size_t label = 0; label <= max_label; ++label) {
      Feature v(d);
      bool separated = false;
      for (int attempt = 0; attempt < kMaxAttempts && !separated; ++attempt) {
        for (auto& x : v) x = static_cast<float>(rng.normal());
        if (label < d) {
          for (const Feature& o : instance_vectors_) {
            const auto proj = static_cast<float>(dot(o, v));
            for (std::size_t i = 0; i < d; ++i) v[i] -= proj * o[i];
          }
        }
        normalize(v);
        separated = std::all_of(instance_vectors_.begin(), instance_vectors_.end(), [&](const Feature& o) {
          return dot(o, v) <= options_.max_instance_cosine;
        });
      }
      if (!separated)
        throw ConfigError("oracle segmenter: cannot separate " + std::to_string(max_label + 1) +
                          " instance vectors in dimension " + std::to_string(d));
      instance_vectors_.push_back(v);
    }
  }

  std::map<FrameId, LabelImage> labels_;
  OracleOptions options_;
  int width_ = 0;
  int height_ = 0;
  std::vector<Feature> instance_vectors_;
};

}  // namespace slp
