#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdcnn/layers.hpp"
#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// Class encoding used everywhere: 0 = Animals, 1 = Litter.
inline constexpr int kAnimalClass = 0;
inline constexpr int kLitterClass = 1;

/// Decision rule: predict Litter iff p > 0.5. An exact tie predicts Animal,
/// resolving ambiguity away from targeting possible wildlife.
template <typename T>
int predict_label(T probability) {
  return probability > T(0.5) ? kLitterClass : kAnimalClass;
}

template <typename T>
struct BceResultT {
  T loss = 0;
  T dloss_dz = 0;
};

/// Binary cross-entropy evaluated on the logit in the overflow-free form
///   loss = max(z, 0) - z*y + log1p(exp(-|z|))
/// with gradient sigmoid(z) - y.
template <typename T>
BceResultT<T> bce_loss_from_logit(T z, int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("label must be 0 or 1");
  }
  if (!std::isfinite(static_cast<double>(z))) {
    throw std::invalid_argument("logit is not finite");
  }
  BceResultT<T> r;
  const T y = static_cast<T>(label);
  r.loss = std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
  r.dloss_dz = sigmoid(z) - y;
  return r;
}

struct LossAcc {
  double mean_loss = 0;
  double accuracy = 0;
};

/// Mean BCE and accuracy over a batch of probabilities. Probabilities are
/// clamped to [1e-7, 1 - 1e-7] before the logs so saturated values cannot
/// produce infinities.
template <typename T>
LossAcc batch_loss_acc(const TensorT<T>& probs, const std::vector<int>& labels) {
  if (probs.size() == 0) {
    throw std::invalid_argument("batch_loss_acc: empty batch");
  }
  if (static_cast<std::size_t>(probs.size()) != labels.size()) {
    throw std::invalid_argument("batch_loss_acc: probability and label counts differ");
  }
  double loss_sum = 0;
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < probs.size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) {
      throw std::invalid_argument("batch_loss_acc: label must be 0 or 1");
    }
    const double p = std::clamp(static_cast<double>(probs[i]), 1e-7, 1.0 - 1e-7);
    loss_sum += -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
    if (predict_label(probs[i]) == y) ++correct;
  }
  LossAcc out;
  out.mean_loss = loss_sum / static_cast<double>(probs.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
  return out;
}

/// Same quantities computed from logits via the stable form; used by the
/// training loop where logits are at hand.
template <typename T>
LossAcc batch_loss_acc_from_logits(const std::vector<T>& logits, const std::vector<int>& labels) {
  if (logits.empty()) {
    throw std::invalid_argument("batch_loss_acc_from_logits: empty batch");
  }
  if (logits.size() != labels.size()) {
    throw std::invalid_argument("batch_loss_acc_from_logits: logit and label counts differ");
  }
  double loss_sum = 0;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    loss_sum += static_cast<double>(bce_loss_from_logit(logits[i], labels[i]).loss);
    if (predict_label(sigmoid(logits[i])) == labels[i]) ++correct;
  }
  LossAcc out;
  out.mean_loss = loss_sum / static_cast<double>(logits.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(logits.size());
  return out;
}

/// Scalar record of one epoch, as logged to the history CSV.
struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

}  // namespace mdcnn
