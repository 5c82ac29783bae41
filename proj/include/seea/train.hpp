#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seea/data.hpp"
#include "seea/model.hpp"
#include "seea/objectives.hpp"
#include "seea/optim.hpp"

namespace seea {

struct TrainConfig {
  int epochs = 3;
  double lr = 0.01;
  int batch_size = 8;
  uint64_t seed = 0;
  std::optional<int> early_stop_patience;  // epochs without val-loss improvement
  FocalLossConfig<float> loss;
  JaccardConfig<float> metric;  // soft monitoring form by default
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;

  std::vector<std::string> validate() const;
};

struct EpochRow {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_jaccard = 0.0;
  double val_jaccard = 0.0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::string model;
  std::string config_snapshot;  // JSON
  std::vector<EpochRow> rows;
  int best_epoch = 0;  // 1-based; epoch whose parameters were retained

  /// header: epoch,train_loss,val_loss,train_jaccard,val_jaccard,wall_seconds
  /// floats with 6 decimal places.
  std::string csv() const;

  /// Bitwise equality of all metric fields. Wall-clock timing is the one
  /// field that cannot reproduce across runs and is excluded.
  bool same_metrics(const TrainReport& other) const;
};

struct TrainHooks {
  /// Called after each epoch's evaluation; return true to stop training.
  std::function<bool(int epoch, const ParameterStore<float>& params, const EpochRow& row)>
      after_epoch;
};

struct TrainResult {
  ParameterStore<float> params;  // best-val-loss snapshot
  TrainReport report;
};

/// Full training loop: per epoch one Adam pass over shuffled train batches,
/// then an inference-mode metric pass over both sets. Aborts with a
/// diagnostic naming epoch and batch if the loss goes non-finite.
TrainResult train(Model<float>& model, const std::vector<SegmentationSample>& train_set,
                  const std::vector<SegmentationSample>& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct EvalResult {
  double focal_loss = 0.0;
  double soft_jaccard = 0.0;
  double hard_jaccard = 0.0;  // at threshold 0.5
};

/// Inference-mode metrics over a sample set; never mutates parameters.
EvalResult evaluate(Model<float>& model, const std::vector<SegmentationSample>& samples,
                    const TrainConfig& cfg);

/// Soft mask and its 0.5-binarization for one [3,H,W] image. The output is
/// resampled back to the input's spatial size.
std::pair<Tensor<float>, Tensor<float>> predict(Model<float>& model, const Tensor<float>& image);

// -- model comparison ---------------------------------------------------------

struct CompareCell {
  double train_loss = 0.0, val_loss = 0.0;
  double train_jaccard = 0.0, val_jaccard = 0.0;
};

struct CompareRow {
  Arch arch;
  std::map<int, CompareCell> at_epochs;
};

struct CompareResult {
  std::vector<CompareRow> rows;  // one per architecture
  std::vector<int> epochs_at;
  std::string config_snapshot;

  /// One row per model; Jaccard columns first, then loss columns, each
  /// train/val per requested epoch count.
  std::string csv() const;
};

/// Trains every architecture with the same data, hyperparameters and master
/// seed, then tabulates metrics at the requested epoch counts.
CompareResult compare_models(const std::vector<Arch>& archs, const ModelConfig& base_cfg,
                             const std::vector<SegmentationSample>& train_set,
                             const std::vector<SegmentationSample>& val_set,
                             const TrainConfig& cfg, const std::vector<int>& epochs_at);

}  // namespace seea
