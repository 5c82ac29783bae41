#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seea/blocks.hpp"
#include "seea/params.hpp"

namespace seea {

enum class Arch { kUNet, kAttentionUNet, kAttentionResUNet, kSeeaUNet };

const char* arch_name(Arch a);
Arch parse_arch(const std::string& name);
std::vector<Arch> all_archs();

struct ModelConfig {
  Arch arch = Arch::kSeeaUNet;
  int input_h = 256;
  int input_w = 256;
  int in_channels = 3;
  int base_filters = 64;
  int depth = 4;  // pooling levels; channel ladder base * {1, 2, ..., 2^depth}
  int se_reduction = 16;
  bool se_on_bottleneck = false;
  bool se_bias = true;                  // biases on both excitation FC layers
  std::vector<int> se_stages;           // encoder stages carrying SE; empty = all
  double attention_f_int_ratio = 0.5;   // gate width as a fraction of skip channels
  int out_channels = 1;
  bool final_batchnorm = false;         // BN between the 1x1 head conv and the sigmoid

  int stage_channels(int stage) const { return base_filters << stage; }
  int bottleneck_channels() const { return base_filters << depth; }
  int f_int(int channels) const;
  bool se_at_stage(int stage) const;
  bool has_gates() const { return arch != Arch::kUNet; }
  bool has_se() const { return arch == Arch::kSeeaUNet; }
  bool residual() const { return arch == Arch::kAttentionResUNet; }

  /// Empty when valid; otherwise one message per violated invariant.
  std::vector<std::string> validate() const;
};

struct LayerRow {
  std::string name;
  Shape output_shape;  // (C, H, W); batch-agnostic
  long long params = 0;
};

/// One architecture instance: parameter store plus the forward pass.
template <typename T>
class Model {
public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }
  const std::vector<LayerRow>& summary() const { return summary_; }

  /// Replaces the weights with a compatible store (same names, shapes and
  /// trainable flags, e.g. from a checkpoint).
  void set_params(const ParameterStore<T>& src);

  /// Runs the network. with_grad binds trainable parameters as
  /// gradient-requiring leaves so backward() can reach them.
  Var<T> forward(const Tensor<T>& x, Mode mode, bool with_grad = false);

  /// Gradients of the last forward/backward, indexed like the store. Empty
  /// tensors for non-trainable or untouched entries.
  std::vector<Tensor<T>> grads() const;

private:
  struct ConvIdx {
    size_t w = 0, b = 0;
  };
  struct BnIdx {
    size_t gamma = 0, beta = 0, mean = 0, var = 0;
  };
  struct BlockIdx {
    ConvIdx c1, c2;
    BnIdx n1, n2;
    std::optional<ConvIdx> shortcut;
  };
  struct SeIdx {
    ConvIdx fc1, fc2;
  };
  struct GateIdx {
    ConvIdx wx, wg, psi;
    BnIdx psi_bn;
  };
  struct EncStage {
    BlockIdx block;
    std::optional<SeIdx> se;
  };
  struct DecStage {
    ConvIdx gating_conv;
    BnIdx gating_bn;
    GateIdx gate;
    BlockIdx block;
  };

  size_t add_param(const std::string& name, Shape shape, bool trainable, double he_fan_in,
                   class Rng& rng);
  ConvIdx add_conv(const std::string& name, int cin, int cout, int k, Rng& rng);
  BnIdx add_bn(const std::string& name, int c, Rng& rng);
  BlockIdx add_block(const std::string& name, int cin, int cout, Rng& rng);
  SeIdx add_se(const std::string& name, int c, Rng& rng);

  Var<T> leaf(size_t idx) const;
  Conv2dParams<T> conv_params(const ConvIdx& i) const;
  BatchNormParams<T> bn_params(const BnIdx& i);
  ConvBlockParams<T> block_params(const BlockIdx& i);
  Var<T> run_block(const Var<T>& x, const BlockIdx& i, Mode mode);

  ModelConfig cfg_;
  ParameterStore<T> store_;
  std::vector<LayerRow> summary_;
  std::vector<EncStage> encoder_;
  BlockIdx bottleneck_;
  std::optional<SeIdx> bottleneck_se_;
  std::vector<DecStage> decoder_;  // deepest stage first
  ConvIdx head_;
  std::optional<BnIdx> head_bn_;
  mutable std::vector<Var<T>> leaves_;  // rebound on every forward
};

/// Closed-form parameter count implied by the configuration. Audits the
/// enumerated store: the two must agree exactly for every valid config.
ParamCounts analytic_param_formula(const ModelConfig& cfg);

/// Published reference totals for the 256x256 Keras builds these
/// architectures descend from, in {UNet, Attention UNet, Attention Residual
/// UNet, SEEA-UNet} order.
struct ReferenceTotals {
  long long total;
  long long non_trainable;
};
const ReferenceTotals& reference_totals(Arch a);
inline constexpr long long kReferenceSeDelta = 20480;  // SEEA total - Attention UNet total

struct ScanRow {
  ModelConfig cfg;
  ParamCounts counts;
  long long delta;  // counts.total - reference total for cfg.arch
};

struct ScanReport {
  std::vector<ScanRow> best_per_arch;  // closest |delta| first, one per arch
  long long best_se_delta = 0;         // achieved SEEA - AttentionUNet total delta
  ModelConfig best_se_cfg;             // SEEA config achieving it
  std::vector<ScanRow> rows;           // full grid
};

/// Sweeps reduction ratio, SE placement/bias conventions, gate width rule,
/// head normalization and input depth over the canonical 256x256 ladder and
/// reports the closest match to the reference totals per architecture.
ScanReport scan_reference_configs();

std::string format_summary_table(const std::vector<LayerRow>& rows);
std::string summary_csv(const std::vector<LayerRow>& rows);

}  // namespace seea
