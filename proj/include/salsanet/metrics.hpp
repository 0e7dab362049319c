#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "salsanet/class_id.hpp"
#include "salsanet/projection.hpp"

namespace salsanet {

// counts[g][p]: cells with ground truth g predicted as p.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws kShape when the grids differ in size.
void accumulate(ConfusionMatrix& cm, const LabelGrid& pred, const LabelGrid& gt);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
};

// Empty denominators score 1.0 when the class is absent from both prediction and
// ground truth, 0.0 otherwise.
ClassScores class_scores(const ConfusionMatrix& cm, ClassId cls);
double mean_iou(const ConfusionMatrix& cm);
double mean_of(const std::array<double, kNumClasses>& ious);

// One row per class with P, R, IoU as percentages (two decimals) and a mean IoU row.
std::string metrics_csv(const ConfusionMatrix& cm);

}  // namespace salsanet
