#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/matrix.hpp"

namespace omniact::evalmetrics {

/// Information-retrieval average precision: scores sorted descending with
/// ties kept in input order (stable), AP = mean of precision@rank over the
/// positive items. Throws when no label is positive (the class is
/// undefined).
double average_precision(std::span<const double> scores,
                         std::span<const uint8_t> labels);

/// Per-class AP over a (samples x classes) score matrix. Classes with no
/// positive sample come back as NaN.
std::vector<double> per_class_ap(
    const Matrix& scores, const std::vector<std::vector<uint8_t>>& labels);

/// Mean over the defined (non-NaN) classes; throws if none are defined.
double mean_ap(std::span<const double> per_class);

/// One planted (instance, class) pair scored against a heatmap: hit when
/// the heatmap's argmax column landed inside [span_begin, span_end).
struct LocalizationCase {
  int argmax_col = 0;
  int span_begin = 0;
  int span_end = 0;
};

/// Fraction of hits; throws on an empty case list.
double localization_hit_rate(std::span<const LocalizationCase> cases);

}  // namespace omniact::evalmetrics
