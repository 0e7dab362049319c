#include "salsanet/metrics.hpp"

#include <cstdio>

#include "salsanet/error.hpp"

namespace salsanet {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts) {
    for (std::uint64_t v : row) sum += v;
  }
  return sum;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    for (std::size_t p = 0; p < kNumClasses; ++p) counts[g][p] += other.counts[g][p];
  }
}

void accumulate(ConfusionMatrix& cm, const LabelGrid& pred, const LabelGrid& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw Error(ErrorCode::kShape, "prediction grid " + std::to_string(pred.height()) + "x" +
                                       std::to_string(pred.width()) + " vs ground truth " +
                                       std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  const auto& p = pred.data();
  const auto& g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) ++cm.counts[index_of(g[i])][index_of(p[i])];
}

ClassScores class_scores(const ConfusionMatrix& cm, ClassId cls) {
  const std::size_t i = index_of(cls);
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    row += cm.counts[i][k];
    col += cm.counts[k][i];
  }
  const std::uint64_t tp = cm.counts[i][i];
  const std::uint64_t fp = col - tp;
  const std::uint64_t fn = row - tp;
  const double vacuous = (row == 0 && col == 0) ? 1.0 : 0.0;
  auto ratio = [vacuous](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? vacuous : static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(tp, tp + fp + fn)};
}

double mean_of(const std::array<double, kNumClasses>& ious) {
  double s = 0.0;
  for (double v : ious) s += v;
  return s / static_cast<double>(kNumClasses);
}

double mean_iou(const ConfusionMatrix& cm) {
  std::array<double, kNumClasses> ious{};
  for (ClassId c : kAllClasses) ious[index_of(c)] = class_scores(cm, c).iou;
  return mean_of(ious);
}

std::string metrics_csv(const ConfusionMatrix& cm) {
  std::string out = "class,precision,recall,iou\n";
  char line[128];
  for (ClassId c : kAllClasses) {
    const ClassScores s = class_scores(cm, c);
    std::snprintf(line, sizeof(line), "%s,%.2f,%.2f,%.2f\n", class_name(c), 100.0 * s.precision,
                  100.0 * s.recall, 100.0 * s.iou);
    out += line;
  }
  std::snprintf(line, sizeof(line), "mean_iou,,,%.2f\n", 100.0 * mean_iou(cm));
  out += line;
  return out;
}

}  // namespace salsanet
