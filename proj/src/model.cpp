#include "seea/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seea/rng.hpp"

namespace seea {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::kUNet: return "unet";
    case Arch::kAttentionUNet: return "attention_unet";
    case Arch::kAttentionResUNet: return "attention_res_unet";
    case Arch::kSeeaUNet: return "seea_unet";
  }
  return "?";
}

Arch parse_arch(const std::string& name) {
  if (name == "unet") return Arch::kUNet;
  if (name == "attention" || name == "attention_unet") return Arch::kAttentionUNet;
  if (name == "attention_res" || name == "attention_res_unet") return Arch::kAttentionResUNet;
  if (name == "seea" || name == "seea_unet") return Arch::kSeeaUNet;
  throw ConfigError({"unknown architecture: " + name +
                     " (expected unet | attention_unet | attention_res_unet | seea_unet)"});
}

std::vector<Arch> all_archs() {
  return {Arch::kUNet, Arch::kAttentionUNet, Arch::kAttentionResUNet, Arch::kSeeaUNet};
}

int ModelConfig::f_int(int channels) const {
  const int f = static_cast<int>(std::llround(channels * attention_f_int_ratio));
  return std::max(1, f);
}

bool ModelConfig::se_at_stage(int stage) const {
  if (!has_se()) return false;
  if (se_stages.empty()) return true;
  return std::find(se_stages.begin(), se_stages.end(), stage) != se_stages.end();
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> issues;
  if (depth < 1) issues.push_back("depth must be >= 1");
  if (base_filters < 1) issues.push_back("base_filters must be >= 1");
  if (in_channels < 1) issues.push_back("in_channels must be >= 1");
  if (out_channels != 1) issues.push_back("out_channels must be 1 (binary masks)");
  if (se_reduction < 1) issues.push_back("se_reduction must be >= 1");
  if (attention_f_int_ratio <= 0.0 || attention_f_int_ratio > 1.0) {
    issues.push_back("attention_f_int_ratio must be in (0, 1]");
  }
  const int div = depth >= 1 && depth < 31 ? (1 << depth) : 0;
  if (div == 0) {
    issues.push_back("depth out of range");
  } else {
    if (input_h < div || input_h % div != 0) {
      issues.push_back("input height " + std::to_string(input_h) + " must be divisible by 2^depth = " +
                       std::to_string(div));
    }
    if (input_w < div || input_w % div != 0) {
      issues.push_back("input width " + std::to_string(input_w) + " must be divisible by 2^depth = " +
                       std::to_string(div));
    }
  }
  for (int s : se_stages) {
    if (s < 0 || s >= depth) {
      issues.push_back("se stage " + std::to_string(s) + " out of range [0, " +
                       std::to_string(depth) + ")");
    }
  }
  if (has_se() && se_reduction >= 1 && depth >= 1) {
    for (int i = 0; i < depth; ++i) {
      if (se_at_stage(i) && stage_channels(i) % se_reduction != 0) {
        issues.push_back("stage " + std::to_string(i) + " channels " +
                         std::to_string(stage_channels(i)) + " not divisible by se_reduction " +
                         std::to_string(se_reduction));
      }
    }
    if (se_on_bottleneck && bottleneck_channels() % se_reduction != 0) {
      issues.push_back("bottleneck channels " + std::to_string(bottleneck_channels()) +
                       " not divisible by se_reduction " + std::to_string(se_reduction));
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace {
// he_fan_in > 0: He-normal with std sqrt(2/fan_in); == 0: zeros; < 0: ones.
template <typename T>
Tensor<T> init_tensor(const Shape& shape, double he_fan_in, Rng& rng) {
  Tensor<T> t(shape);
  if (he_fan_in > 0.0) {
    const double stddev = std::sqrt(2.0 / he_fan_in);
    for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
  } else if (he_fan_in < 0.0) {
    std::fill(t.vec().begin(), t.vec().end(), T(1));
  }
  return t;
}
}  // namespace

template <typename T>
size_t Model<T>::add_param(const std::string& name, Shape shape, bool trainable,
                           double he_fan_in, Rng& rng) {
  return store_.add(name, init_tensor<T>(shape, he_fan_in, rng), trainable);
}

template <typename T>
typename Model<T>::ConvIdx Model<T>::add_conv(const std::string& name, int cin, int cout, int k,
                                              Rng& rng) {
  ConvIdx idx;
  idx.w = add_param(name + ".weight", {cout, cin, k, k}, true,
                    static_cast<double>(cin) * k * k, rng);
  idx.b = add_param(name + ".bias", {cout}, true, 0.0, rng);
  return idx;
}

template <typename T>
typename Model<T>::BnIdx Model<T>::add_bn(const std::string& name, int c, Rng& rng) {
  BnIdx idx;
  idx.gamma = add_param(name + ".gamma", {c}, true, -1.0, rng);
  idx.beta = add_param(name + ".beta", {c}, true, 0.0, rng);
  idx.mean = add_param(name + ".running_mean", {c}, false, 0.0, rng);
  idx.var = add_param(name + ".running_var", {c}, false, -1.0, rng);
  return idx;
}

template <typename T>
typename Model<T>::BlockIdx Model<T>::add_block(const std::string& name, int cin, int cout,
                                                Rng& rng) {
  BlockIdx idx;
  idx.c1 = add_conv(name + ".conv1", cin, cout, 3, rng);
  idx.n1 = add_bn(name + ".bn1", cout, rng);
  idx.c2 = add_conv(name + ".conv2", cout, cout, 3, rng);
  idx.n2 = add_bn(name + ".bn2", cout, rng);
  if (cfg_.residual() && cin != cout) {
    idx.shortcut = add_conv(name + ".shortcut", cin, cout, 1, rng);
  }
  return idx;
}

template <typename T>
typename Model<T>::SeIdx Model<T>::add_se(const std::string& name, int c, Rng& rng) {
  const int u = c / cfg_.se_reduction;
  SeIdx idx;
  idx.fc1.w = add_param(name + ".fc1.weight", {c, u}, true, static_cast<double>(c), rng);
  idx.fc1.b = add_param(name + ".fc1.bias", {u}, true, 0.0, rng);
  idx.fc2.w = add_param(name + ".fc2.weight", {u, c}, true, static_cast<double>(u), rng);
  idx.fc2.b = add_param(name + ".fc2.bias", {c}, true, 0.0, rng);
  return idx;
}

namespace {
long long conv_param_count(int cin, int cout, int k) {
  return static_cast<long long>(cout) * cin * k * k + cout;
}
}  // namespace

template <typename T>
Model<T>::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  auto issues = cfg_.validate();
  if (!issues.empty()) throw ConfigError(std::move(issues));

  Rng rng(derive_seed(seed, SeedStream::kInit));
  const int D = cfg_.depth;
  const int H = cfg_.input_h, W = cfg_.input_w;
  auto row = [this](const std::string& name, int c, int h, int w, long long p) {
    summary_.push_back({name, {c, h, w}, p});
  };
  auto block_rows = [&](const std::string& name, int cin, int c, int h, int w) {
    row(name + ".conv1", c, h, w, conv_param_count(cin, c, 3));
    row(name + ".bn1", c, h, w, 4LL * c);
    row(name + ".conv2", c, h, w, conv_param_count(c, c, 3));
    row(name + ".bn2", c, h, w, 4LL * c);
    if (cfg_.residual() && cin != c) {
      row(name + ".shortcut", c, h, w, conv_param_count(cin, c, 1));
    }
  };

  int cin = cfg_.in_channels;
  for (int i = 0; i < D; ++i) {
    const std::string name = "enc" + std::to_string(i + 1);
    const int c = cfg_.stage_channels(i);
    const int h = H >> i, w = W >> i;
    EncStage stage;
    stage.block = add_block(name, cin, c, rng);
    block_rows(name, cin, c, h, w);
    if (cfg_.se_at_stage(i)) {
      stage.se = add_se(name + ".se", c, rng);
      const int u = c / cfg_.se_reduction;
      row(name + ".se", c, h, w,
          2LL * c * u + (cfg_.se_bias ? static_cast<long long>(u) + c : 0LL));
    }
    row(name + ".pool", c, h / 2, w / 2, 0);
    encoder_.push_back(std::move(stage));
    cin = c;
  }

  {
    const int c = cfg_.bottleneck_channels();
    const int h = H >> D, w = W >> D;
    bottleneck_ = add_block("bottleneck", cin, c, rng);
    block_rows("bottleneck", cin, c, h, w);
    if (cfg_.has_se() && cfg_.se_on_bottleneck) {
      bottleneck_se_ = add_se("bottleneck.se", c, rng);
      const int u = c / cfg_.se_reduction;
      row("bottleneck.se", c, h, w,
          2LL * c * u + (cfg_.se_bias ? static_cast<long long>(u) + c : 0LL));
    }
  }

  for (int i = D - 1; i >= 0; --i) {
    const std::string name = "dec" + std::to_string(i + 1);
    const int c = cfg_.stage_channels(i);
    const int cd = cfg_.stage_channels(i + 1);  // channels arriving from below
    const int h = H >> i, w = W >> i;
    DecStage stage;
    if (cfg_.has_gates()) {
      stage.gating_conv = add_conv(name + ".gating.conv", cd, c, 1, rng);
      stage.gating_bn = add_bn(name + ".gating.bn", c, rng);
      row(name + ".gating", c, h / 2, w / 2, conv_param_count(cd, c, 1) + 4LL * c);
      const int f = cfg_.f_int(c);
      stage.gate.wx = add_conv(name + ".gate.wx", c, f, 1, rng);
      stage.gate.wg = add_conv(name + ".gate.wg", c, f, 1, rng);
      stage.gate.psi = add_conv(name + ".gate.psi", f, 1, 1, rng);
      stage.gate.psi_bn = add_bn(name + ".gate.psi_bn", 1, rng);
      row(name + ".gate", c, h, w,
          conv_param_count(c, f, 1) + conv_param_count(c, f, 1) + conv_param_count(f, 1, 1) + 4);
    }
    row(name + ".upsample", cd, h, w, 0);
    stage.block = add_block(name, cd + c, c, rng);
    block_rows(name, cd + c, c, h, w);
    decoder_.push_back(std::move(stage));
  }

  head_ = add_conv("head.conv", cfg_.base_filters, cfg_.out_channels, 1, rng);
  row("head.conv", cfg_.out_channels, H, W,
      conv_param_count(cfg_.base_filters, cfg_.out_channels, 1));
  if (cfg_.final_batchnorm) {
    head_bn_ = add_bn("head.bn", cfg_.out_channels, rng);
    row("head.bn", cfg_.out_channels, H, W, 4LL * cfg_.out_channels);
  }
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

template <typename T>
Var<T> Model<T>::leaf(size_t idx) const {
  return leaves_[idx];
}

template <typename T>
Conv2dParams<T> Model<T>::conv_params(const ConvIdx& i) const {
  return {leaf(i.w), leaf(i.b)};
}

template <typename T>
BatchNormParams<T> Model<T>::bn_params(const BnIdx& i) {
  return {leaf(i.gamma), leaf(i.beta), &store_[i.mean].tensor, &store_[i.var].tensor};
}

template <typename T>
ConvBlockParams<T> Model<T>::block_params(const BlockIdx& i) {
  return {conv_params(i.c1), conv_params(i.c2), bn_params(i.n1), bn_params(i.n2)};
}

template <typename T>
Var<T> Model<T>::run_block(const Var<T>& x, const BlockIdx& i, Mode mode) {
  if (cfg_.residual()) {
    ResidualConvBlockParams<T> p{block_params(i), std::nullopt};
    if (i.shortcut) p.shortcut = conv_params(*i.shortcut);
    return residual_conv_block(x, p, mode);
  }
  return conv_block(x, block_params(i), mode);
}

template <typename T>
Var<T> Model<T>::forward(const Tensor<T>& x, Mode mode, bool with_grad) {
  if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.input_h ||
      x.dim(3) != cfg_.input_w) {
    throw ShapeError("model forward: input " + shape_str(x.shape()) + " does not match (N," +
                     std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.input_h) +
                     "," + std::to_string(cfg_.input_w) + ")");
  }
  leaves_.assign(store_.size(), Var<T>());
  for (size_t i = 0; i < store_.size(); ++i) {
    if (store_[i].trainable) {
      leaves_[i] = Var<T>::leaf(store_[i].tensor, with_grad);
    }
  }

  Var<T> h = Var<T>::constant(x);
  std::vector<Var<T>> skips;
  skips.reserve(encoder_.size());
  for (auto& stage : encoder_) {
    Var<T> e = run_block(h, stage.block, mode);
    if (stage.se) {
      SeBlockParams<T> p{leaf(stage.se->fc1.w), leaf(stage.se->fc1.b), leaf(stage.se->fc2.w),
                         leaf(stage.se->fc2.b), cfg_.se_reduction};
      e = se_block(e, p, mode);
    }
    skips.push_back(e);
    h = maxpool2d(e, 2, 2);
  }

  Var<T> d = run_block(h, bottleneck_, mode);
  if (bottleneck_se_) {
    SeBlockParams<T> p{leaf(bottleneck_se_->fc1.w), leaf(bottleneck_se_->fc1.b),
                       leaf(bottleneck_se_->fc2.w), leaf(bottleneck_se_->fc2.b),
                       cfg_.se_reduction};
    d = se_block(d, p, mode);
  }

  for (size_t s = 0; s < decoder_.size(); ++s) {
    auto& stage = decoder_[s];
    const Var<T>& skip = skips[skips.size() - 1 - s];
    Var<T> a = skip;
    if (cfg_.has_gates()) {
      GatingSignalParams<T> gp{conv_params(stage.gating_conv), bn_params(stage.gating_bn)};
      Var<T> g = gating_signal(d, gp, mode);
      AttentionGateParams<T> ap{conv_params(stage.gate.wx), conv_params(stage.gate.wg),
                                conv_params(stage.gate.psi), bn_params(stage.gate.psi_bn)};
      a = attention_gate(skip, g, ap, mode);
    }
    Var<T> u = upsample2d(d, 2);
    d = run_block(concat_channels(u, a), stage.block, mode);
  }

  Var<T> out = conv2d(d, leaf(head_.w), leaf(head_.b), 1, Padding::kSame);
  if (head_bn_) {
    out = batchnorm(out, bn_params(*head_bn_), mode);
  }
  return sigmoid(out);
}

template <typename T>
void Model<T>::set_params(const ParameterStore<T>& src) {
  if (src.size() != store_.size()) {
    throw ValueError("set_params: store has " + std::to_string(src.size()) +
                     " entries, model expects " + std::to_string(store_.size()));
  }
  for (size_t i = 0; i < store_.size(); ++i) {
    if (src[i].name != store_[i].name || src[i].trainable != store_[i].trainable) {
      throw ValueError("set_params: entry " + std::to_string(i) + " is " + src[i].name +
                       ", model expects " + store_[i].name);
    }
    if (!src[i].tensor.same_shape(store_[i].tensor)) {
      throw ShapeError("set_params: " + src[i].name + " has shape " +
                       shape_str(src[i].tensor.shape()) + ", model expects " +
                       shape_str(store_[i].tensor.shape()));
    }
    store_[i].tensor = src[i].tensor;
  }
}

template <typename T>
std::vector<Tensor<T>> Model<T>::grads() const {
  std::vector<Tensor<T>> out(store_.size());
  for (size_t i = 0; i < store_.size(); ++i) {
    if (leaves_.size() == store_.size() && leaves_[i].defined() && leaves_[i].has_grad()) {
      out[i] = leaves_[i].grad();
    }
  }
  return out;
}

template class Model<float>;
template class Model<double>;

// ---------------------------------------------------------------------------
// closed-form parameter accounting
// ---------------------------------------------------------------------------

ParamCounts analytic_param_formula(const ModelConfig& cfg) {
  auto issues = cfg.validate();
  if (!issues.empty()) throw ConfigError(std::move(issues));

  long long trainable = 0, non_trainable = 0;
  auto conv = [&](int cin, int cout, int k) {
    trainable += static_cast<long long>(cout) * cin * k * k + cout;
  };
  auto bn = [&](int c) {
    trainable += 2LL * c;
    non_trainable += 2LL * c;
  };
  auto block = [&](int cin, int c) {
    conv(cin, c, 3);
    bn(c);
    conv(c, c, 3);
    bn(c);
    if (cfg.residual() && cin != c) conv(cin, c, 1);
  };
  auto se = [&](int c) {
    const long long u = c / cfg.se_reduction;
    trainable += static_cast<long long>(c) * u + u * c;
    if (cfg.se_bias) trainable += u + c;
  };

  int cin = cfg.in_channels;
  for (int i = 0; i < cfg.depth; ++i) {
    const int c = cfg.stage_channels(i);
    block(cin, c);
    if (cfg.se_at_stage(i)) se(c);
    cin = c;
  }
  block(cin, cfg.bottleneck_channels());
  if (cfg.has_se() && cfg.se_on_bottleneck) se(cfg.bottleneck_channels());

  for (int i = cfg.depth - 1; i >= 0; --i) {
    const int c = cfg.stage_channels(i);
    const int cd = cfg.stage_channels(i + 1);
    if (cfg.has_gates()) {
      conv(cd, c, 1);  // gating signal projection
      bn(c);
      const int f = cfg.f_int(c);
      conv(c, f, 1);  // wx
      conv(c, f, 1);  // wg
      conv(f, 1, 1);  // psi
      bn(1);
    }
    block(cd + c, c);
  }

  conv(cfg.base_filters, cfg.out_channels, 1);
  if (cfg.final_batchnorm) bn(cfg.out_channels);

  return {trainable + non_trainable, trainable, non_trainable};
}

const ReferenceTotals& reference_totals(Arch a) {
  static const ReferenceTotals kTable[4] = {
      {31401349LL, 11778LL},  // unet
      {37334665LL, 15618LL},  // attention_unet
      {39090377LL, 21506LL},  // attention_res_unet
      {37355145LL, 15618LL},  // seea_unet
  };
  return kTable[static_cast<int>(a)];
}

ScanReport scan_reference_configs() {
  ScanReport report;
  const std::vector<int> in_channels = {1, 3};
  const std::vector<bool> final_bn = {false, true};
  const std::vector<double> f_int_ratios = {0.5, 1.0};
  const std::vector<int> reductions = {1, 2, 4, 8, 16, 32};
  const std::vector<bool> se_biases = {true, false};
  const std::vector<std::vector<int>> placements = {
      {}, {0, 1}, {2, 3}, {0, 1, 2}, {1, 2, 3}, {3}};

  auto push = [&](const ModelConfig& cfg) {
    if (!cfg.validate().empty()) return;
    const ParamCounts counts = analytic_param_formula(cfg);
    report.rows.push_back({cfg, counts, counts.total - reference_totals(cfg.arch).total});
  };

  for (Arch arch : all_archs()) {
    ModelConfig base;
    base.arch = arch;
    for (int ic : in_channels) {
      base.in_channels = ic;
      for (bool fb : final_bn) {
        base.final_batchnorm = fb;
        if (!base.has_gates()) {
          push(base);
          continue;
        }
        for (double ratio : f_int_ratios) {
          base.attention_f_int_ratio = ratio;
          if (!base.has_se()) {
            push(base);
            continue;
          }
          for (int r : reductions) {
            base.se_reduction = r;
            for (bool sb : se_biases) {
              base.se_bias = sb;
              for (const auto& stages : placements) {
                base.se_stages = stages;
                for (bool bott : {false, true}) {
                  base.se_on_bottleneck = bott;
                  push(base);
                }
              }
            }
          }
        }
      }
    }
  }

  for (Arch arch : all_archs()) {
    const ScanRow* best = nullptr;
    for (const auto& r : report.rows) {
      if (r.cfg.arch != arch) continue;
      if (!best || std::llabs(r.delta) < std::llabs(best->delta)) best = &r;
    }
    if (best) report.best_per_arch.push_back(*best);
  }

  bool have_se_delta = false;
  for (const auto& r : report.rows) {
    if (r.cfg.arch != Arch::kSeeaUNet) continue;
    ModelConfig att = r.cfg;
    att.arch = Arch::kAttentionUNet;
    const long long delta = r.counts.total - analytic_param_formula(att).total;
    if (!have_se_delta ||
        std::llabs(delta - kReferenceSeDelta) <
            std::llabs(report.best_se_delta - kReferenceSeDelta)) {
      report.best_se_delta = delta;
      report.best_se_cfg = r.cfg;
      have_se_delta = true;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// summaries
// ---------------------------------------------------------------------------

std::string format_summary_table(const std::vector<LayerRow>& rows) {
  size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream os;
  os << std::left;
  os.width(static_cast<std::streamsize>(name_w + 2));
  os << "layer";
  os << "output (C,H,W)      params\n";
  long long total = 0;
  for (const auto& r : rows) {
    os.width(static_cast<std::streamsize>(name_w + 2));
    os << r.name;
    std::string shape = shape_str(r.output_shape);
    os.width(20);
    os << shape;
    os << r.params << "\n";
    total += r.params;
  }
  os << "total parameters: " << total << "\n";
  return os.str();
}

std::string summary_csv(const std::vector<LayerRow>& rows) {
  std::ostringstream os;
  os << "layer,out_channels,out_h,out_w,params\n";
  for (const auto& r : rows) {
    os << r.name << "," << r.output_shape[0] << "," << r.output_shape[1] << ","
       << r.output_shape[2] << "," << r.params << "\n";
  }
  return os.str();
}

}  // namespace seea
