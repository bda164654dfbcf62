#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mdcnn/loss.hpp"
#include "mdcnn/manifest.hpp"
#include "mdcnn/metrics.hpp"
#include "mdcnn/model.hpp"

namespace mdcnn {

struct EvalResult {
  ConfusionMatrix matrix;
  std::vector<std::string> unreadable;  // populated only when skipping is allowed
};

/// Tallies predictions against actual labels in the fixed orientation
/// (rows actual, columns predicted, Animal first). The predictor may throw;
/// with allow_skip the failing sample is recorded and excluded from the
/// counts, otherwise the error propagates.
inline EvalResult evaluate_with(const std::vector<Sample>& samples,
                                const std::function<int(const Sample&)>& predictor,
                                bool allow_skip = false) {
  if (samples.empty()) {
    throw std::invalid_argument("evaluate: empty sample set");
  }
  EvalResult result;
  for (const Sample& s : samples) {
    int predicted;
    try {
      predicted = predictor(s);
    } catch (const std::exception& e) {
      if (!allow_skip) throw;
      result.unreadable.push_back(e.what());
      continue;
    }
    result.matrix.add(s.label, predicted);
  }
  return result;
}

/// Runs the model over every sample and applies the standard decision rule
/// (Litter iff p > 0.5). Architecture/shape problems surface as errors
/// naming the offending tensor before any image is read.
inline EvalResult evaluate(const ModelParams& params, const std::vector<Sample>& samples,
                           const std::filesystem::path& base_dir, bool skip_unreadable = false) {
  model_chain_shapes(params, 3, kImageSize, kImageSize);
  return evaluate_with(
      samples,
      [&](const Sample& s) {
        const Tensor image = load_sample(s, base_dir);
        return predict_label(model_forward_one(image, params).prob);
      },
      skip_unreadable);
}

}  // namespace mdcnn
