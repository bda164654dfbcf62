#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace mdcnn {

/// 2x2 confusion counts with Animal as the positive class; rows are actual,
/// columns are predicted:
///
///                     predicted Animal   predicted Litter
///   actual Animal           tp                 fn
///   actual Litter           fp                 tn
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;

  void add(int actual, int predicted) {
    if (actual == 0) {
      (predicted == 0 ? tp : fn) += 1;
    } else {
      (predicted == 0 ? fp : tn) += 1;
    }
  }

  std::int64_t total() const { return tp + fn + fp + tn; }
};

/// Scalar summaries of a confusion matrix. A field is empty when its
/// denominator is zero. hazard_rate = fn / (tp + fn) is the fraction of real
/// animals classified as litter -- the error mode that would send a
/// retrieval system after wildlife.
struct MatrixMetrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> hazard_rate;
};

inline MatrixMetrics metrics_from_matrix(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) {
    throw std::invalid_argument("metrics_from_matrix: empty confusion matrix");
  }
  MatrixMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn > 0) {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    m.hazard_rate = static_cast<double>(cm.fn) / static_cast<double>(cm.tp + cm.fn);
  }
  return m;
}

}  // namespace mdcnn
