#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "slp/evaluation.hpp"
#include "support.hpp"

using namespace slp;
using slp_test::fill_rect;
using slp_test::random_mask;

namespace {

BinaryMask rect(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.set(x, y);
  return m;
}

FrameMatches matched(LabelId label, std::optional<ObjectId> object) {
  if (!object) return {{label, std::nullopt}};
  return {{label, Match{*object, 1.0}}};
}

std::vector<FrameMatches> sequence_of(std::initializer_list<std::optional<ObjectId>> ids) {
  std::vector<FrameMatches> out;
  for (auto id : ids) out.push_back(matched(0, id));
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(GroundTruth, LabelValuesShiftByOne) {
  auto img = slp_test::label_image(6, 4);
  fill_rect(img, 0, 0, 2, 2, 1);
  fill_rect(img, 3, 1, 6, 4, 4);
  const auto gt = ground_truth_from_labels({{5, img}});
  ASSERT_EQ(gt.frames.size(), 1u);
  const auto& labels = gt.frames.at(5);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels.at(0).count(), 4u);
  EXPECT_EQ(labels.at(3).count(), 9u);
}

TEST(BestIouMatch, IdenticalSingleLabel) {
  const auto m = rect(8, 8, 1, 1, 5, 5);
  const auto r = best_iou_match({{0, m}}, {{4, m}});
  ASSERT_TRUE(r.at(0));
  EXPECT_EQ(*r.at(0), (Match{4, 1.0}));
}

TEST(BestIouMatch, ZeroOverlapIsUnmatched) {
  const auto r = best_iou_match({{0, rect(8, 8, 0, 0, 2, 2)}}, {{1, rect(8, 8, 4, 4, 8, 8)}});
  EXPECT_FALSE(r.at(0));
  EXPECT_FALSE(best_iou_match({{0, rect(8, 8, 0, 0, 2, 2)}}, {}).at(0));
}

TEST(BestIouMatch, HandBuiltOverlaps) {
  // label 0: 4x4 at origin; label 1: 4x4 at (4,0)
  // object 7 covers label 0 exactly; object 2 covers the right half of label 0
  // plus all of label 1; object 5 covers half of label 1.
  const FrameLabels labels = {{0, rect(8, 4, 0, 0, 4, 4)}, {1, rect(8, 4, 4, 0, 8, 4)}};
  const std::map<ObjectId, BinaryMask> tracked = {
      {7, rect(8, 4, 0, 0, 4, 4)}, {2, rect(8, 4, 2, 0, 8, 4)}, {5, rect(8, 4, 4, 0, 6, 4)}};
  const auto r = best_iou_match(labels, tracked);
  EXPECT_EQ(*r.at(0), (Match{7, 1.0}));
  EXPECT_EQ(r.at(1)->object, 2);
  EXPECT_NEAR(r.at(1)->iou, 16.0 / 24.0, 1e-12);
}

TEST(BestIouMatch, EqualsExhaustivePerLabelArgmax) {
  std::mt19937 gen(31);
  for (int trial = 0; trial < 300; ++trial) {
    FrameLabels labels;
    std::map<ObjectId, BinaryMask> tracked;
    for (int l = 0; l < 2 + trial % 3; ++l) labels.emplace(l, random_mask(gen, 10, 8, 0.3));
    for (int o = 0; o < 3 + trial % 2; ++o) tracked.emplace(10 - 3 * o, random_mask(gen, 10, 8, 0.3));
    if (trial % 5 == 0) tracked.emplace(20, labels.at(0));
    if (trial % 7 == 0) tracked.emplace(21, labels.at(0));  // tie with object 20
    const auto r = best_iou_match(labels, tracked);
    for (const auto& [label, truth] : labels) {
      std::optional<Match> best;
      for (const auto& [object, mask] : tracked) {
        const double s = iou(truth, mask);
        if (s == 0.0) continue;
        if (!best || s > best->iou || (s == best->iou && object < best->object)) best = Match{object, s};
      }
      EXPECT_EQ(r.at(label), best) << "trial " << trial << " label " << label;
    }
  }
}

TEST(BestIouMatch, OneObjectMayServeSeveralLabels) {
  const FrameLabels labels = {{0, rect(8, 4, 0, 0, 4, 4)}, {1, rect(8, 4, 4, 0, 8, 4)}};
  const auto r = best_iou_match(labels, {{3, BinaryMask::full(8, 4)}});
  EXPECT_EQ(r.at(0)->object, 3);
  EXPECT_EQ(r.at(1)->object, 3);
}

TEST(TrackingLosses, ConstantSequenceHasNone) {
  EXPECT_EQ(count_tracking_losses(sequence_of({1, 1, 1, 1})), 0u);
  EXPECT_EQ(count_tracking_losses({}), 0u);
}

TEST(TrackingLosses, SwitchFixture) { EXPECT_EQ(count_tracking_losses(sequence_of({1, 1, 2, 2, 1})), 2u); }

TEST(TrackingLosses, GapFixture) {
  EXPECT_EQ(count_tracking_losses(sequence_of({1, std::nullopt, 1})), 0u);
  EXPECT_EQ(count_tracking_losses(sequence_of({1, std::nullopt, 2})), 0u);
  std::vector<FrameMatches> absent = {matched(0, 1), {}, matched(0, 2)};
  EXPECT_EQ(count_tracking_losses(absent), 0u);
}

TEST(TrackingLosses, LabelsCountIndependently) {
  std::vector<FrameMatches> seq = {
      {{0, Match{1, 1.0}}, {1, Match{2, 1.0}}},
      {{0, Match{2, 1.0}}, {1, Match{2, 1.0}}},
      {{0, Match{2, 1.0}}, {1, Match{1, 1.0}}},
  };
  EXPECT_EQ(count_tracking_losses(seq), 2u);
}

TEST(TrackingLosses, BoundedByMatchedPairs) {
  std::mt19937 gen(2);
  std::uniform_int_distribution<int> pick(-1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FrameMatches> seq;
    std::map<LabelId, std::size_t> matched_frames;
    for (int f = 0; f < 12; ++f) {
      FrameMatches m;
      for (LabelId l = 0; l < 3; ++l) {
        const int v = pick(gen);
        if (v == -1) continue;
        m.emplace(l, v == 0 ? std::nullopt : std::optional<Match>(Match{v, 0.5}));
        if (v != 0) ++matched_frames[l];
      }
      seq.push_back(m);
    }
    std::size_t bound = 0;
    for (const auto& [l, n] : matched_frames) bound += n - 1;
    EXPECT_LE(count_tracking_losses(seq), bound);
  }
}

TEST(Evaluate, PerfectTrackerScoresOne) {
  GroundTruth gt;
  Tracks tracks;
  for (FrameId f = 0; f < 5; ++f) {
    gt.frames[f] = {{0, rect(16, 16, f, 0, f + 4, 4)}, {1, rect(16, 16, 8, 8, 16, 16)}};
    tracks[3].insert_or_assign(f, gt.frames[f].at(0));
    tracks[9].insert_or_assign(f, gt.frames[f].at(1));
  }
  const auto r = evaluate(gt, tracks);
  EXPECT_DOUBLE_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(r.tracking_losses, 0u);
  EXPECT_EQ(r.labeled_objects, 10u);
  EXPECT_EQ(r.matched_objects, 10u);
}

TEST(Evaluate, UnmatchedLabelsCountAsZero) {
  GroundTruth gt;
  gt.frames[0] = {{0, rect(8, 8, 0, 0, 4, 4)}, {1, rect(8, 8, 4, 4, 8, 8)}};
  gt.frames[1] = {{0, rect(8, 8, 0, 0, 4, 4)}};
  Tracks tracks;
  tracks[0].insert_or_assign(0, rect(8, 8, 0, 0, 4, 2));  // IoU 0.5
  tracks[0].insert_or_assign(1, rect(8, 8, 0, 0, 4, 4));  // IoU 1
  const auto r = evaluate(gt, tracks);
  EXPECT_NEAR(r.mean_iou, 1.5 / 3.0, 1e-12);
  EXPECT_EQ(r.labeled_objects, 3u);
  EXPECT_EQ(r.matched_objects, 2u);
  EXPECT_FALSE(r.per_frame.at(0).at(1));
}

TEST(Evaluate, ObjectSwitchCountsAsLoss) {
  GroundTruth gt;
  Tracks tracks;
  const auto m = rect(8, 8, 2, 2, 6, 6);
  for (FrameId f = 0; f < 5; ++f) gt.frames[f] = {{0, m}};
  for (FrameId f : {0, 1, 4}) tracks[0].insert_or_assign(f, m);
  for (FrameId f : {2, 3}) tracks[1].insert_or_assign(f, m);
  EXPECT_EQ(evaluate(gt, tracks).tracking_losses, 2u);
}

TEST(Evaluate, InvariantUnderObjectRelabeling) {
  std::mt19937 gen(6);
  for (int trial = 0; trial < 30; ++trial) {
    GroundTruth gt;
    Tracks tracks;
    for (FrameId f = 0; f < 6; ++f) {
      for (LabelId l = 0; l < 3; ++l) gt.frames[f].insert_or_assign(l, random_mask(gen, 12, 10, 0.3));
      for (ObjectId o = 0; o < 4; ++o)
        if ((f + o + trial) % 3 != 0) tracks[o].insert_or_assign(f, random_mask(gen, 12, 10, 0.3));
    }
    // Order-preserving relabel keeps tie-breaks, so both metrics must agree exactly.
    Tracks relabeled;
    for (const auto& [o, h] : tracks) relabeled[100 + 7 * o] = h;
    const auto a = evaluate(gt, tracks);
    const auto b = evaluate(gt, relabeled);
    EXPECT_DOUBLE_EQ(a.mean_iou, b.mean_iou);
    EXPECT_EQ(a.tracking_losses, b.tracking_losses);
  }
}

TEST(SpotCheck, IdenticalLabelSets) {
  GroundTruth a;
  a.frames[0] = {{0, rect(8, 8, 0, 0, 4, 4)}, {1, rect(8, 8, 4, 4, 8, 8)}};
  a.frames[3] = {{0, rect(8, 8, 1, 1, 3, 3)}};
  const auto r = spot_check(a, a);
  EXPECT_EQ(r.fn_a, 0u);
  EXPECT_EQ(r.fn_v, 0u);
  EXPECT_DOUBLE_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(r.author_masks, 3u);
}

TEST(SpotCheck, VolunteerOmitsOneObject) {
  GroundTruth author;
  GroundTruth volunteer;
  author.frames[0] = {{0, rect(8, 8, 0, 0, 4, 4)}, {1, rect(8, 8, 4, 4, 8, 8)}};
  author.frames[1] = {{0, rect(8, 8, 0, 0, 4, 4)}};
  volunteer.frames[0] = {{0, rect(8, 8, 0, 0, 4, 4)}};
  volunteer.frames[1] = {{0, rect(8, 8, 0, 0, 4, 4)}};
  const auto r = spot_check(author, volunteer);
  EXPECT_EQ(r.fn_v, 1u);
  EXPECT_EQ(r.fn_a, 0u);
  EXPECT_NEAR(r.mean_iou, 2.0 / 3.0, 1e-12);
}

TEST(SpotCheck, HandComputedFixture) {
  // Frame 0: author A0 (4x4) vs volunteer V0 = left half of A0 -> 0.5.
  // Frame 1: author B0 (2x2) exact; volunteer adds two extra masks -> FN_a 2.
  // Frame 2: author C0, C1; volunteer one mask equal to C0 -> C1 scores 0, FN_v 1.
  GroundTruth author;
  GroundTruth volunteer;
  author.frames[0] = {{0, rect(8, 8, 0, 0, 4, 4)}};
  volunteer.frames[0] = {{5, rect(8, 8, 0, 0, 2, 4)}};
  author.frames[1] = {{0, rect(8, 8, 2, 2, 4, 4)}};
  volunteer.frames[1] = {{0, rect(8, 8, 2, 2, 4, 4)}, {1, rect(8, 8, 6, 6, 8, 8)}, {2, rect(8, 8, 0, 6, 1, 8)}};
  author.frames[2] = {{0, rect(8, 8, 0, 0, 3, 3)}, {1, rect(8, 8, 5, 5, 8, 8)}};
  volunteer.frames[2] = {{0, rect(8, 8, 0, 0, 3, 3)}};
  const auto r = spot_check(author, volunteer, {0, 1, 2});
  EXPECT_EQ(r.fn_a, 2u);
  EXPECT_EQ(r.fn_v, 1u);
  EXPECT_EQ(r.author_masks, 4u);
  EXPECT_NEAR(r.mean_iou, (0.5 + 1.0 + 1.0 + 0.0) / 4.0, 1e-12);
  const auto only_first = spot_check(author, volunteer, {0});
  EXPECT_NEAR(only_first.mean_iou, 0.5, 1e-12);
}

TEST(SpotCheck, MissingFrameThrows) {
  GroundTruth author;
  author.frames[0] = {{0, rect(4, 4, 0, 0, 2, 2)}};
  EXPECT_THROW(spot_check(author, GroundTruth{}), ContractViolation);
}

TEST(Report, HeadersMatchTableColumns) {
  EXPECT_STREQ(kRunReportHeader, "variant,k,F,time_min,mean_iou,tracking_losses");
  EXPECT_STREQ(kVideoSummaryHeader, "N_f,T_sfm,N_m,T_pxl,FN_v,FN_a,mean_iou");
}

TEST(Report, SummaryRowCarriesTableIShape) {
  VideoSummaryRow row;
  row.frame_count = 281;
  row.sfm_min = 12.5;
  row.mesh_faces = 1000;
  row.pixel_match_min = 0.25;
  row.spot = SpotCheckResult{1, 2, 0.940, 10};
  EXPECT_EQ(format_row(row), "281,12.5000,1000,0.2500,2,1,0.940");
  row.spot.reset();
  EXPECT_EQ(format_row(row), "281,12.5000,1000,0.2500,,,");
}

TEST(Report, RunRowFormat) {
  const RunReportRow row{"sfm-sam-2", 5, 4, 1.25, 0.9876, 3};
  EXPECT_EQ(format_row(row), "sfm-sam-2,5,4,1.2500,0.988,3");
}

TEST(Report, WriteCsv) {
  slp_test::TempDir dir;
  const std::vector<RunReportRow> rows = {{"sam-only-1", 1, 0, 0.5, 0.4, 7}, {"sam-only-2", 0, 1, 0.25, 0.5, 0}};
  write_csv(dir.path() / "runs.csv", kRunReportHeader, rows);
  EXPECT_EQ(read_file(dir.path() / "runs.csv"),
            "variant,k,F,time_min,mean_iou,tracking_losses\n"
            "sam-only-1,1,0,0.5000,0.400,7\n"
            "sam-only-2,0,1,0.2500,0.500,0\n");
  EXPECT_THROW(write_csv(dir.path() / "missing" / "x.csv", kRunReportHeader, rows), IoError);
}
