#include <random>

#include <gtest/gtest.h>

#include "salsanet/error.hpp"
#include "salsanet/metrics.hpp"
#include "support/fixtures.hpp"

using namespace salsanet;

namespace {

ConfusionMatrix from_rows(std::array<std::array<std::uint64_t, 3>, 3> rows) {
  ConfusionMatrix cm;
  cm.counts = rows;
  return cm;
}

}  // namespace

TEST(Confusion, ClosedFormScores) {
  // rows: ground truth, cols: prediction
  const ConfusionMatrix cm = from_rows({{{50, 5, 5}, {10, 30, 0}, {0, 2, 8}}});
  const ClassScores road = class_scores(cm, ClassId::kRoad);
  EXPECT_DOUBLE_EQ(road.precision, 30.0 / 37.0);
  EXPECT_DOUBLE_EQ(road.recall, 30.0 / 40.0);
  EXPECT_DOUBLE_EQ(road.iou, 30.0 / 47.0);
  const ClassScores veh = class_scores(cm, ClassId::kVehicle);
  EXPECT_DOUBLE_EQ(veh.precision, 8.0 / 13.0);
  EXPECT_DOUBLE_EQ(veh.recall, 8.0 / 10.0);
  EXPECT_DOUBLE_EQ(veh.iou, 8.0 / 15.0);
  EXPECT_DOUBLE_EQ(mean_iou(cm), (50.0 / 70.0 + 30.0 / 47.0 + 8.0 / 15.0) / 3.0);
  EXPECT_EQ(cm.total(), 110u);
}

TEST(Confusion, AbsentClassScoresOneMissedClassZero) {
  const ConfusionMatrix none = from_rows({{{5, 0, 0}, {0, 5, 0}, {0, 0, 0}}});
  const ClassScores v = class_scores(none, ClassId::kVehicle);
  EXPECT_EQ(v.precision, 1.0);
  EXPECT_EQ(v.recall, 1.0);
  EXPECT_EQ(v.iou, 1.0);
  EXPECT_EQ(mean_iou(none), 1.0);
  const ConfusionMatrix missed = from_rows({{{5, 0, 0}, {0, 5, 0}, {3, 0, 0}}});
  const ClassScores m = class_scores(missed, ClassId::kVehicle);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.iou, 0.0);
}

TEST(Confusion, AccumulateAndMerge) {
  LabelGrid gt(2, 2), pred(2, 2);
  gt.at(0, 0) = ClassId::kRoad;
  pred.at(0, 0) = ClassId::kRoad;
  gt.at(1, 1) = ClassId::kVehicle;
  pred.at(0, 1) = ClassId::kVehicle;
  ConfusionMatrix a;
  accumulate(a, pred, gt);
  EXPECT_EQ(a.counts[1][1], 1u);
  EXPECT_EQ(a.counts[0][2], 1u);
  EXPECT_EQ(a.counts[2][0], 1u);
  EXPECT_EQ(a.counts[0][0], 1u);
  ConfusionMatrix b = a;
  b.merge(a);
  EXPECT_EQ(b.total(), 8u);
  EXPECT_EQ(b.counts[2][0], 2u);
  ConfusionMatrix bad;
  EXPECT_EQ(fixtures::code_of([&] { accumulate(bad, LabelGrid(2, 3), gt); }), ErrorCode::kShape);
}

TEST(Confusion, MergeEqualsAccumulatingTogether) {
  std::mt19937_64 rng(1);
  ConfusionMatrix together, left, right;
  for (int i = 0; i < 6; ++i) {
    LabelGrid g(4, 4), p(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        g.at(r, c) = static_cast<ClassId>(rng() % 3);
        p.at(r, c) = static_cast<ClassId>(rng() % 3);
      }
    accumulate(together, p, g);
    accumulate(i % 2 ? left : right, p, g);
  }
  left.merge(right);
  EXPECT_EQ(left, together);
}

TEST(Confusion, ScoresStayInUnitInterval) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts)
      for (auto& v : row) v = rng() % 4;
    for (ClassId c : kAllClasses) {
      const ClassScores s = class_scores(cm, c);
      for (double v : {s.precision, s.recall, s.iou}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_LE(s.iou, std::min(s.precision, s.recall) + 1e-12);
    }
  }
}

TEST(Confusion, CsvFormat) {
  const ConfusionMatrix cm = from_rows({{{50, 5, 5}, {10, 30, 0}, {0, 2, 8}}});
  EXPECT_EQ(metrics_csv(cm),
            "class,precision,recall,iou\n"
            "background,83.33,83.33,71.43\n"
            "road,81.08,75.00,63.83\n"
            "vehicle,61.54,80.00,53.33\n"
            "mean_iou,,,62.86\n");
}
