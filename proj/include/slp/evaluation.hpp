#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"
#include "slp/image_io.hpp"
#include "slp/propagation.hpp"

namespace slp {

using LabelId = int;
using FrameLabels = std::map<LabelId, BinaryMask>;

/// Labeled object masks per frame.
struct GroundTruth {
  std::map<FrameId, FrameLabels> frames;
};

/// Splits label images into per-label masks; pixel value v > 0 is label v - 1.
inline GroundTruth ground_truth_from_labels(const std::map<FrameId, LabelImage>& images) {
  GroundTruth gt;
  for (const auto& [frame, img] : images) {
    FrameLabels labels;
    for (std::size_t i = 0; i < img.values.size(); ++i) {
      const auto v = img.values[i];
      if (v == 0) continue;
      auto it = labels.find(v - 1);
      if (it == labels.end()) it = labels.emplace(v - 1, BinaryMask(img.width, img.height)).first;
      it->second.set_index(i);
    }
    gt.frames.emplace(frame, std::move(labels));
  }
  return gt;
}

struct Match {
  ObjectId object = 0;
  double iou = 0.0;

  friend bool operator==(const Match&, const Match&) = default;
};

/// Per label: the best match, or nullopt when the label overlaps nothing.
using FrameMatches = std::map<LabelId, std::optional<Match>>;

/// Each label independently takes the tracked mask with the highest IoU
/// (lowest object id on ties). One object may serve several labels.
inline FrameMatches best_iou_match(const FrameLabels& labels, const std::map<ObjectId, BinaryMask>& tracked) {
  FrameMatches out;
  for (const auto& [label, truth] : labels) {
    std::optional<Match> best;
    for (const auto& [object, mask] : tracked) {
      const double score = iou(truth, mask);
      if (score > 0.0 && (!best || score > best->iou)) best = Match{object, score};
    }
    out.emplace(label, best);
  }
  return out;
}

/// A loss is a label matched in two consecutive frames to different objects.
/// A frame where the label is absent or unmatched pairs with nothing.
inline std::size_t count_tracking_losses(const std::vector<FrameMatches>& sequence) {
  std::size_t losses = 0;
  for (std::size_t t = 1; t < sequence.size(); ++t) {
    for (const auto& [label, match] : sequence[t]) {
      if (!match) continue;
      const auto prev = sequence[t - 1].find(label);
      if (prev == sequence[t - 1].end() || !prev->second) continue;
      if (prev->second->object != match->object) ++losses;
    }
  }
  return losses;
}

struct MatchReport {
  std::map<FrameId, FrameMatches> per_frame;
  double mean_iou = 0.0;  // over every labeled object in every frame, unmatched = 0
  std::size_t tracking_losses = 0;
  std::size_t labeled_objects = 0;
  std::size_t matched_objects = 0;
};

using Tracks = std::map<ObjectId, std::map<FrameId, BinaryMask>>;

inline Tracks tracks_of(const SlpResult& result) {
  Tracks tracks;
  for (const auto& obj : result.objects) tracks.emplace(obj.id, obj.history);
  return tracks;
}

inline MatchReport evaluate(const GroundTruth& truth, const Tracks& tracks) {
  MatchReport report;
  std::vector<FrameMatches> sequence;
  double iou_sum = 0.0;
  for (const auto& [frame, labels] : truth.frames) {
    std::map<ObjectId, BinaryMask> in_frame;
    for (const auto& [object, history] : tracks)
      if (const auto it = history.find(frame); it != history.end()) in_frame.emplace(object, it->second);
    auto matches = best_iou_match(labels, in_frame);
    for (const auto& [label, m] : matches) {
      ++report.labeled_objects;
      if (m) {
        ++report.matched_objects;
        iou_sum += m->iou;
      }
    }
    sequence.push_back(matches);
    report.per_frame.emplace(frame, std::move(matches));
  }
  report.mean_iou = report.labeled_objects == 0 ? 0.0 : iou_sum / static_cast<double>(report.labeled_objects);
  report.tracking_losses = count_tracking_losses(sequence);
  return report;
}

struct SpotCheckResult {
  std::size_t fn_a = 0;  // objects the volunteer labeled but the author did not
  std::size_t fn_v = 0;  // objects the author labeled but the volunteer did not
  double mean_iou = 0.0;
  std::size_t author_masks = 0;
};

/// Author masks each take their best-IoU volunteer mask; the mean runs over all
/// author masks of the checked frames. Per frame, a surplus of volunteer masks
/// counts toward FN_a and a surplus of author masks toward FN_v.
inline SpotCheckResult spot_check(const GroundTruth& author, const GroundTruth& volunteer,
                                  std::vector<FrameId> frames = {}) {
  if (frames.empty())
    for (const auto& [f, labels] : author.frames) frames.push_back(f);
  SpotCheckResult out;
  double sum = 0.0;
  for (FrameId f : frames) {
    const auto a = author.frames.find(f);
    const auto v = volunteer.frames.find(f);
    if (a == author.frames.end() || v == volunteer.frames.end())
      throw ContractViolation("spot_check: frame " + std::to_string(f) + " missing from one label set");
    for (const auto& [label, mask] : a->second) {
      double best = 0.0;
      for (const auto& [vlabel, vmask] : v->second) best = std::max(best, iou(mask, vmask));
      sum += best;
      ++out.author_masks;
    }
    const auto na = a->second.size();
    const auto nv = v->second.size();
    if (nv > na) out.fn_a += nv - na;
    if (na > nv) out.fn_v += na - nv;
  }
  out.mean_iou = out.author_masks == 0 ? 0.0 : sum / static_cast<double>(out.author_masks);
  return out;
}

/// One row of the per-run report (variant, k, F, time, IoU, losses).
struct RunReportRow {
  std::string variant;
  int k = 0;
  int skip_frames = 0;
  double time_min = 0.0;
  double mean_iou = 0.0;
  std::size_t tracking_losses = 0;
};

/// One row of the per-video summary. Spot-check columns are empty when no
/// author labels were supplied.
struct VideoSummaryRow {
  std::size_t frame_count = 0;  // N_f
  double sfm_min = 0.0;         // T_sfm: geometry ingestion time
  std::size_t mesh_faces = 0;   // N_m
  double pixel_match_min = 0.0; // T_pxl
  std::optional<SpotCheckResult> spot;
};

inline constexpr const char* kRunReportHeader = "variant,k,F,time_min,mean_iou,tracking_losses";
inline constexpr const char* kVideoSummaryHeader = "N_f,T_sfm,N_m,T_pxl,FN_v,FN_a,mean_iou";

namespace report_detail {
inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}
}  // namespace report_detail

inline std::string format_row(const RunReportRow& r) {
  std::ostringstream out;
  out << r.variant << ',' << r.k << ',' << r.skip_frames << ',' << report_detail::fixed(r.time_min, 4) << ','
      << report_detail::fixed(r.mean_iou, 3) << ',' << r.tracking_losses;
  return out.str();
}

inline std::string format_row(const VideoSummaryRow& r) {
  std::ostringstream out;
  out << r.frame_count << ',' << report_detail::fixed(r.sfm_min, 4) << ',' << r.mesh_faces << ','
      << report_detail::fixed(r.pixel_match_min, 4) << ',';
  if (r.spot)
    out << r.spot->fn_v << ',' << r.spot->fn_a << ',' << report_detail::fixed(r.spot->mean_iou, 3);
  else
    out << ",,";
  return out.str();
}

template <class Row>
void write_csv(const std::filesystem::path& path, const char* header, const std::vector<Row>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << header << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace slp
