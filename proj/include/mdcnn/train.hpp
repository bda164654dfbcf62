#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "mdcnn/adam.hpp"
#include "mdcnn/loss.hpp"
#include "mdcnn/manifest.hpp"
#include "mdcnn/metrics.hpp"
#include "mdcnn/model.hpp"

namespace mdcnn {

/// Every training hyperparameter in one place. Values the pipeline fixes by
/// convention (95 epochs, 0.1 validation fraction, 140px RGB inputs, 32
/// filters, kernel sizes 3/2/3, 2x2 pooling, 10 replicates) sit alongside
/// the knobs left open (batch size 32, learning rate 1e-3, seed).
struct TrainConfig {
  int epochs = 95;
  double val_fraction = 0.1;
  int image_size = 140;
  int channels = 3;
  int filters = 32;
  std::array<int, 3> kernel_sizes{3, 2, 3};
  int pool = 2;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int replicates = 10;

  ModelArch arch() const { return ModelArch{channels, image_size, filters, kernel_sizes}; }
};

inline void validate_config(const TrainConfig& c) {
  if (c.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(c.val_fraction > 0.0) || !(c.val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must be in (0, 1)");
  }
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (c.image_size < 1 || c.channels < 1 || c.filters < 1) {
    throw std::invalid_argument("image_size, channels and filters must be positive");
  }
  for (const int k : c.kernel_sizes) {
    if (k < 1) throw std::invalid_argument("kernel sizes must be positive");
  }
  if (c.pool != 2) throw std::invalid_argument("only 2x2 pooling is supported");
  if (c.replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  if (!(c.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

struct RunHistory {
  std::vector<EpochMetrics> epochs;
  ConfusionMatrix final_val_matrix;  // zero counts when there is no val split
  std::uint64_t seed = 0;
  double duration_seconds = 0;
};

/// Progress callback: (epoch, metrics) after each epoch's frozen passes.
using EpochCallback = std::function<void(const EpochMetrics&)>;

struct TrainResult {
  ModelParams params;
  RunHistory history;
};

/// A split materialized in memory: decoded images with their labels, in
/// manifest order.
struct LoadedSet {
  std::vector<Tensor> images;
  std::vector<int> labels;
};

namespace detail {

inline LoadedSet load_split(const SampleManifest& manifest, Split split,
                            const std::filesystem::path& base_dir) {
  LoadedSet set;
  for (const Sample& s : manifest.samples) {
    if (s.split != split) continue;
    set.images.push_back(load_sample(s, base_dir));
    set.labels.push_back(s.label);
  }
  return set;
}

inline LossAcc frozen_metrics(const ModelParams& params, const mdcnn::LoadedSet& set) {
  std::vector<float> logits;
  logits.reserve(set.images.size());
  for (const Tensor& img : set.images) {
    logits.push_back(model_forward_one(img, params).logit);
  }
  return batch_loss_acc_from_logits(logits, set.labels);
}

}  // namespace detail

/// The training loop over preloaded tensors. Per epoch: one seeded
/// re-shuffle of the train order, minibatch forward/backward/adam over every
/// batch (the final short batch included, its loss averaged over its own
/// size), then frozen full-pass train and val metrics. Identical
/// (config, data, seed) inputs give bitwise-identical results.
inline TrainResult train_loaded(const TrainConfig& config, const LoadedSet& train_set,
                                const LoadedSet& val_set,
                                const EpochCallback& on_epoch = {}) {
  validate_config(config);
  if (train_set.images.empty()) {
    throw std::runtime_error("train: empty train split");
  }
  {
    std::int64_t per_class[2] = {0, 0};
    for (const int y : train_set.labels) per_class[y] += 1;
    if (per_class[0] != per_class[1]) {
      throw std::runtime_error("train: train split is not balanced (" +
                               std::to_string(per_class[0]) + " vs " +
                               std::to_string(per_class[1]) + ")");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();

  Rng rng(config.seed);
  ModelParams params = init_params(rng, config.arch());
  AdamState opt = make_adam_state(params, config.lr);

  std::vector<std::size_t> order(train_set.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.history.seed = config.seed;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng_shuffle(rng, order);
    const std::size_t n = order.size();
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0, batch_no = 0; start < n; start += bs, ++batch_no) {
      const std::size_t batch_len = std::min(bs, n - start);
      ModelGrads grads = ModelParams::zero_like(params);
      double batch_loss = 0;
      try {
        for (std::size_t b = 0; b < batch_len; ++b) {
          const std::size_t idx = order[start + b];
          const ForwardTrace trace = model_forward_one(train_set.images[idx], params);
          const auto bce = bce_loss_from_logit(trace.logit, train_set.labels[idx]);
          batch_loss += static_cast<double>(bce.loss);
          model_backward_logit(params, trace, bce.dloss_dz / static_cast<float>(batch_len),
                               grads);
        }
        batch_loss /= static_cast<double>(batch_len);
        if (!std::isfinite(batch_loss)) {
          throw std::runtime_error("non-finite batch loss");
        }
        adam_step(params, grads, opt);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_no) + ": " + e.what());
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    try {
      const LossAcc train_m = detail::frozen_metrics(params, train_set);
      m.train_loss = train_m.mean_loss;
      m.train_acc = train_m.accuracy;
      if (!val_set.images.empty()) {
        const LossAcc val_m = detail::frozen_metrics(params, val_set);
        m.val_loss = val_m.mean_loss;
        m.val_acc = val_m.accuracy;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("train: epoch " + std::to_string(epoch) +
                               ", metrics pass: " + e.what());
    }
    result.history.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  for (std::size_t i = 0; i < val_set.images.size(); ++i) {
    const float p = model_forward_one(val_set.images[i], params).prob;
    result.history.final_val_matrix.add(val_set.labels[i], predict_label(p));
  }
  result.history.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.params = std::move(params);
  return result;
}

/// Loads the manifest's train and val splits from disk and runs the loop.
inline TrainResult train(const TrainConfig& config, const SampleManifest& manifest,
                         const std::filesystem::path& manifest_dir,
                         const EpochCallback& on_epoch = {}) {
  validate_config(config);
  const auto train_set = detail::load_split(manifest, Split::train, manifest_dir);
  const auto val_set = detail::load_split(manifest, Split::val, manifest_dir);
  return train_loaded(config, train_set, val_set, on_epoch);
}

/// Arithmetic means of the four final metrics across replicate runs.
struct ReplicateMeans {
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

inline ReplicateMeans replicate_means(const std::vector<EpochMetrics>& finals) {
  if (finals.empty()) {
    throw std::invalid_argument("replicate_means: no runs");
  }
  ReplicateMeans m;
  for (const EpochMetrics& e : finals) {
    m.train_loss += e.train_loss;
    m.train_acc += e.train_acc;
    m.val_loss += e.val_loss;
    m.val_acc += e.val_acc;
  }
  const auto n = static_cast<double>(finals.size());
  m.train_loss /= n;
  m.train_acc /= n;
  m.val_loss /= n;
  m.val_acc /= n;
  return m;
}

/// Rounding used when replicate means are displayed.
inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

struct ReplicateResult {
  std::vector<TrainResult> runs;       // one per replicate, seeds seed+0, seed+1, ...
  std::vector<EpochMetrics> finals;    // last epoch of each run
  ReplicateMeans means;                // full precision; round2 for display
};

/// n independent trainings with seeds seed, seed+1, ...; the four final
/// metrics are averaged at full precision.
inline ReplicateResult run_replicates(const TrainConfig& config, const SampleManifest& manifest,
                                      const std::filesystem::path& manifest_dir, int n,
                                      const EpochCallback& on_epoch = {}) {
  if (n < 1) {
    throw std::invalid_argument("run_replicates: need at least one run");
  }
  validate_config(config);
  const auto train_set = detail::load_split(manifest, Split::train, manifest_dir);
  const auto val_set = detail::load_split(manifest, Split::val, manifest_dir);
  ReplicateResult result;
  for (int i = 0; i < n; ++i) {
    TrainConfig run_config = config;
    run_config.seed = config.seed + static_cast<std::uint64_t>(i);
    result.runs.push_back(train_loaded(run_config, train_set, val_set, on_epoch));
    result.finals.push_back(result.runs.back().history.epochs.back());
  }
  result.means = replicate_means(result.finals);
  return result;
}

/// CSV log of one run: header `epoch,train_loss,train_acc,val_loss,val_acc`,
/// one row per epoch at 6 decimal places, LF line endings.
inline void write_history_csv(const std::vector<EpochMetrics>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(path + ": cannot open for writing");
  }
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char row[160];
  for (const EpochMetrics& e : history) {
    std::snprintf(row, sizeof(row), "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                  e.train_acc, e.val_loss, e.val_acc);
    out << row;
  }
  out.flush();
  if (!out) {
    throw std::runtime_error(path + ": write failed");
  }
}

}  // namespace mdcnn
