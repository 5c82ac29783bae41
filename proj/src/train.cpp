#include "seea/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "seea/graph.hpp"
#include "seea/image.hpp"

namespace seea {

namespace {
std::string config_snapshot_json(const ModelConfig& mc, const TrainConfig& tc) {
  nlohmann::ordered_json j;
  j["model"] = {{"arch", arch_name(mc.arch)},
                {"input", {mc.input_h, mc.input_w}},
                {"in_channels", mc.in_channels},
                {"base_filters", mc.base_filters},
                {"depth", mc.depth},
                {"se_reduction", mc.se_reduction}};
  j["train"] = {{"epochs", tc.epochs},
                {"lr", tc.lr},
                {"batch_size", tc.batch_size},
                {"seed", tc.seed},
                {"focal_gamma", tc.loss.gamma},
                {"focal_alpha", tc.loss.alpha}};
  return j.dump();
}
}  // namespace

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> issues;
  if (epochs < 1) issues.push_back("epochs must be >= 1");
  if (!(lr >= 0.0)) issues.push_back("lr must be >= 0");
  if (batch_size < 1) issues.push_back("batch_size must be >= 1");
  if (early_stop_patience && *early_stop_patience < 1) {
    issues.push_back("early_stop_patience must be >= 1");
  }
  if (loss.gamma < 0) issues.push_back("focal gamma must be >= 0");
  if (!(loss.alpha > 0 && loss.alpha <= 1)) issues.push_back("focal alpha must be in (0,1]");
  if (!(metric.smooth > 0)) issues.push_back("jaccard smooth must be > 0");
  return issues;
}

namespace {
std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

std::string TrainReport::csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,train_jaccard,val_jaccard,wall_seconds\n";
  for (const auto& r : rows) {
    os << r.epoch << "," << fmt6(r.train_loss) << "," << fmt6(r.val_loss) << ","
       << fmt6(r.train_jaccard) << "," << fmt6(r.val_jaccard) << "," << fmt6(r.wall_seconds)
       << "\n";
  }
  return os.str();
}

bool TrainReport::same_metrics(const TrainReport& other) const {
  if (rows.size() != other.rows.size() || best_epoch != other.best_epoch) return false;
  auto bits_equal = [](double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
  };
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = other.rows[i];
    if (a.epoch != b.epoch || !bits_equal(a.train_loss, b.train_loss) ||
        !bits_equal(a.val_loss, b.val_loss) || !bits_equal(a.train_jaccard, b.train_jaccard) ||
        !bits_equal(a.val_jaccard, b.val_jaccard)) {
      return false;
    }
  }
  return true;
}

namespace {

EvalResult eval_batches(Model<float>& model, const std::vector<Batch>& batches,
                        const TrainConfig& cfg) {
  EvalResult out;
  JaccardAccumulator<float> soft, hard;
  double loss_weighted = 0.0;
  long long total_samples = 0;
  for (const auto& b : batches) {
    Var<float> y = model.forward(b.images, Mode::kInfer, /*with_grad=*/false);
    Var<float> loss = binary_focal_loss(y, b.masks, cfg.loss);
    const int n = b.images.dim(0);
    loss_weighted += static_cast<double>(loss.value()[0]) * n;
    total_samples += n;
    soft.update(y.value(), b.masks, cfg.metric.threshold);
    hard.update(y.value(), b.masks, std::optional<float>(0.5f));
  }
  if (total_samples == 0) throw ValueError("evaluate: empty sample set");
  out.focal_loss = loss_weighted / static_cast<double>(total_samples);
  out.soft_jaccard = static_cast<double>(soft.value(cfg.metric.smooth));
  out.hard_jaccard = static_cast<double>(hard.value(cfg.metric.smooth));
  return out;
}

}  // namespace

EvalResult evaluate(Model<float>& model, const std::vector<SegmentationSample>& samples,
                    const TrainConfig& cfg) {
  return eval_batches(model, make_eval_batches(samples, cfg.batch_size), cfg);
}

TrainResult train(Model<float>& model, const std::vector<SegmentationSample>& train_set,
                  const std::vector<SegmentationSample>& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  auto issues = cfg.validate();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  if (train_set.empty() || val_set.empty()) {
    throw ValueError("train: train and validation sets must be non-empty");
  }

  AdamConfig<float> acfg;
  acfg.lr = static_cast<float>(cfg.lr);
  acfg.beta1 = static_cast<float>(cfg.adam_beta1);
  acfg.beta2 = static_cast<float>(cfg.adam_beta2);
  acfg.epsilon = static_cast<float>(cfg.adam_epsilon);
  Adam<float> opt(model.params(), acfg);

  TrainResult result;
  result.report.model = arch_name(model.config().arch);
  result.report.config_snapshot = config_snapshot_json(model.config(), cfg);

  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  const auto val_eval_batches = make_eval_batches(val_set, cfg.batch_size);
  const auto train_eval_batches = make_eval_batches(train_set, cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = make_batches(train_set, cfg.batch_size, cfg.seed, epoch - 1);
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& b = batches[bi];
      Var<float> y = model.forward(b.images, Mode::kTrain, /*with_grad=*/true);
      Var<float> loss = binary_focal_loss(y, b.masks, cfg.loss);
      if (!std::isfinite(static_cast<double>(loss.value()[0]))) {
        throw ValueError("train: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(bi));
      }
      backward(loss);
      opt.step(model.params(), model.grads());
    }

    EpochRow row;
    row.epoch = epoch;
    const EvalResult tr = eval_batches(model, train_eval_batches, cfg);
    const EvalResult va = eval_batches(model, val_eval_batches, cfg);
    row.train_loss = tr.focal_loss;
    row.train_jaccard = tr.soft_jaccard;
    row.val_loss = va.focal_loss;
    row.val_jaccard = va.soft_jaccard;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.report.rows.push_back(row);

    if (row.val_loss < best_val_loss) {
      best_val_loss = row.val_loss;
      result.params = model.params();
      result.report.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }

    const bool stop_hook = hooks.after_epoch && hooks.after_epoch(epoch, model.params(), row);
    const bool stop_early = cfg.early_stop_patience && since_best >= *cfg.early_stop_patience;
    if (stop_hook || stop_early) break;
  }

  if (result.report.best_epoch == 0) {
    result.params = model.params();
    result.report.best_epoch = static_cast<int>(result.report.rows.size());
  }
  return result;
}

std::pair<Tensor<float>, Tensor<float>> predict(Model<float>& model, const Tensor<float>& image) {
  if (image.ndim() != 3 || image.dim(0) != model.config().in_channels) {
    throw ShapeError("predict: expected [" + std::to_string(model.config().in_channels) +
                     ",H,W] image, got " + shape_str(image.shape()));
  }
  const int H = image.dim(1), W = image.dim(2);
  const ModelConfig& cfg = model.config();
  Tensor<float> resized = resize_bilinear(image, cfg.input_h, cfg.input_w);
  Tensor<float> batch({1, cfg.in_channels, cfg.input_h, cfg.input_w}, resized.vec());
  Var<float> y = model.forward(batch, Mode::kInfer, /*with_grad=*/false);
  Tensor<float> soft({1, cfg.input_h, cfg.input_w}, y.value().vec());
  soft = resize_bilinear(soft, H, W);
  Tensor<float> hard = soft;
  binarize(hard);
  return {std::move(soft), std::move(hard)};
}

std::string CompareResult::csv() const {
  std::ostringstream os;
  os << "model";
  for (int e : epochs_at) os << ",train_jaccard_" << e << "ep,val_jaccard_" << e << "ep";
  for (int e : epochs_at) os << ",train_loss_" << e << "ep,val_loss_" << e << "ep";
  os << "\n";
  for (const auto& row : rows) {
    os << arch_name(row.arch);
    for (int e : epochs_at) {
      const auto it = row.at_epochs.find(e);
      if (it == row.at_epochs.end()) {
        os << ",-,-";
      } else {
        os << "," << fmt6(it->second.train_jaccard) << "," << fmt6(it->second.val_jaccard);
      }
    }
    for (int e : epochs_at) {
      const auto it = row.at_epochs.find(e);
      if (it == row.at_epochs.end()) {
        os << ",-,-";
      } else {
        os << "," << fmt6(it->second.train_loss) << "," << fmt6(it->second.val_loss);
      }
    }
    os << "\n";
  }
  return os.str();
}

CompareResult compare_models(const std::vector<Arch>& archs, const ModelConfig& base_cfg,
                             const std::vector<SegmentationSample>& train_set,
                             const std::vector<SegmentationSample>& val_set,
                             const TrainConfig& cfg, const std::vector<int>& epochs_at) {
  if (epochs_at.empty()) throw ConfigError({"compare: epochs_at must not be empty"});
  int max_epoch = 0;
  for (int e : epochs_at) max_epoch = std::max(max_epoch, e);

  TrainConfig run_cfg = cfg;
  run_cfg.epochs = max_epoch;

  CompareResult result;
  result.epochs_at = epochs_at;
  result.config_snapshot = config_snapshot_json(base_cfg, run_cfg);
  for (Arch arch : archs) {
    ModelConfig mc = base_cfg;
    mc.arch = arch;
    Model<float> model(mc, cfg.seed);
    TrainResult tr = train(model, train_set, val_set, run_cfg);
    CompareRow row;
    row.arch = arch;
    for (int e : epochs_at) {
      if (e >= 1 && e <= static_cast<int>(tr.report.rows.size())) {
        const EpochRow& r = tr.report.rows[e - 1];
        row.at_epochs[e] = {r.train_loss, r.val_loss, r.train_jaccard, r.val_jaccard};
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace seea
