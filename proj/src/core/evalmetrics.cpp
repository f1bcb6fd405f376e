#include "core/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/error.hpp"

namespace omniact::evalmetrics {

double average_precision(std::span<const double> scores,
                         std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw_invalid("score/label length mismatch");
  }
  if (scores.empty()) throw_invalid("cannot rank an empty list");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t lhs, size_t rhs) {
    return scores[lhs] > scores[rhs];
  });

  size_t positives = 0;
  double ap_sum = 0.0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++positives;
      ap_sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
    }
  }
  if (positives == 0) {
    throw_invalid("average precision undefined: no positive labels");
  }
  return ap_sum / static_cast<double>(positives);
}

std::vector<double> per_class_ap(
    const Matrix& scores, const std::vector<std::vector<uint8_t>>& labels) {
  if (static_cast<size_t>(scores.rows) != labels.size()) {
    throw_invalid("score matrix and label list disagree on sample count");
  }
  std::vector<double> aps(scores.cols,
                          std::numeric_limits<double>::quiet_NaN());
  std::vector<double> col(scores.rows);
  std::vector<uint8_t> lab(scores.rows);
  for (int a = 0; a < scores.cols; ++a) {
    bool any = false;
    for (int i = 0; i < scores.rows; ++i) {
      col[i] = scores.at(i, a);
      lab[i] = labels[i][a];
      any = any || lab[i];
    }
    if (any) aps[a] = average_precision(col, lab);
  }
  return aps;
}

double mean_ap(std::span<const double> per_class) {
  double sum = 0.0;
  size_t defined = 0;
  for (double ap : per_class) {
    if (std::isnan(ap)) continue;
    sum += ap;
    ++defined;
  }
  if (defined == 0) throw_invalid("mAP undefined: every class lacks positives");
  return sum / static_cast<double>(defined);
}

double localization_hit_rate(std::span<const LocalizationCase> cases) {
  if (cases.empty()) throw_invalid("no localization cases to score");
  size_t hits = 0;
  for (const LocalizationCase& c : cases) {
    if (c.argmax_col >= c.span_begin && c.argmax_col < c.span_end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

}  // namespace omniact::evalmetrics
