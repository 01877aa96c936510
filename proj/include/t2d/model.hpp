#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t2d/kv_config.hpp"
#include "t2d/layers.hpp"

namespace t2d {

/// How the k input slices reach the prediction head.
///   plain       one stem over all k channels (conventional thick-input 2D net)
///   esm         shared stem per g-slice mini-group, channel fusion afterwards
///   esm_concat  esm + concat(U, O_d) → 1×1 conv per mini-group
///   esm_dot     esm + U ⊙ proj(O_d) per mini-group
///   esm_ssa     esm + slice-sensitive channel attention per mini-group
enum class FusionMode { Plain, Esm, EsmConcat, EsmDot, EsmSsa };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& s);

struct ModelConfig {
  int k = 3;
  int g = 3;
  int base_width = 16;
  int trunk_width = 32;
  FusionMode fusion_mode = FusionMode::EsmSsa;
  int ssa_pool_size = 8;
  int ssa_channels = 16;
  /// Zero-initialize the attention output projection so the attended
  /// features start equal to the trunk features.
  bool ssa_zero_init = true;
  int input_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  int groups() const { return fusion_mode == FusionMode::Plain ? 1 : k / g; }
  int stem_in() const { return fusion_mode == FusionMode::Plain ? k : g; }
  int stem_out() const { return 2 * base_width; }

  void to_kv(KvConfig& kv, const std::string& prefix = "model.") const;
  static ModelConfig from_kv(const KvConfig& kv, const std::string& prefix = "model.");
};

/// Per-forward audit of the multiplexed computation.
struct ForwardTrace {
  int stem_calls = 0;
  int ssa_calls = 0;
  /// Identity of the first stem kernel used by each stem call.
  std::vector<const Node*> stem_kernels;
};

/// Multiply-accumulate cost of one layer on a given output grid.
struct LayerCost {
  std::string name;
  int cin = 0, cout = 0, kernel = 1;
  int out_h = 0, out_w = 0;
  /// Cumulative spatial downsampling of the layer output w.r.t. the input.
  int downsample = 1;
  /// Extra matrix-product MACs (attention) not expressed by the conv fields.
  std::uint64_t extra = 0;
  std::uint64_t macs() const {
    return static_cast<std::uint64_t>(cin) * cout * kernel * kernel * out_h * out_w + extra;
  }
};

/// y_p = Σ_q softmax_q(⟨q_p, k_q⟩ / sqrt(n)) · v_q for a×n queries and
/// keys and a×m values. Returns a×m.
Tensor channel_attention(const Tensor& q, const Tensor& k, const Tensor& v);
/// The softmax-normalized affinity matrix used by channel_attention.
Tensor channel_affinity(const Tensor& q, const Tensor& k);

class T2DNet {
 public:
  static T2DNet build(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }
  std::vector<Tensor> parameters() const { return params_.tensors(); }
  std::size_t parameter_count() const { return params_.count(); }
  void zero_grad();

  /// k×S×S slices → k×S×S probabilities.
  Tensor forward(const Tensor& group, ForwardTrace* trace = nullptr) const;

  /// f1: stem_in×S×S → stem_out×S/4×S/4.
  Tensor forward_stem(const Tensor& mini_group) const;
  /// concat → 1×1 conv to half the channels → 1×1 conv to trunk width.
  Tensor fuse_groups(const std::vector<Tensor>& features) const;
  /// f2: two residual stages (one strided) + bilinear decoder → trunk_width×S×S.
  Tensor trunk(const Tensor& fused) const;
  /// Channel-wise non-local attention with O_d as query and U as key/value.
  Tensor ssa(const Tensor& u, const Tensor& o) const;
  /// Affinity matrix (ssa_channels × ssa_channels) that ssa(u, o) applies.
  Tensor ssa_affinity(const Tensor& u, const Tensor& o) const;
  /// Per-mini-group features → k×S×S probabilities.
  Tensor head(const std::vector<Tensor>& attended) const;
  /// Features that feed the head for mini-group `group`.
  Tensor attend(const Tensor& u, const Tensor& o) const;

  /// Conv/attention layer costs of one forward on an S×S input.
  std::vector<LayerCost> layer_costs(int size) const;

 private:
  explicit T2DNet(const ModelConfig& cfg) : cfg_(cfg), params_(cfg.seed) {}

  ModelConfig cfg_;
  nn::ParamStore params_;

  nn::Conv stem_conv_;
  nn::Norm stem_norm_;
  nn::ResBlock stem_block_;

  nn::Conv fuse_a_, fuse_b_;
  nn::Norm fuse_a_norm_, fuse_b_norm_;

  nn::ResBlock trunk_stage1_, trunk_stage2_;
  nn::Conv decoder_conv_;
  nn::Norm decoder_norm_;

  // Slice-sensitive attention (η).
  nn::Conv ssa_pre_q_, ssa_pre_k_, ssa_phi_, ssa_psi_, ssa_value_, ssa_out_;
  nn::Norm ssa_out_norm_;
  // esm_concat: (U ‖ O_d) → trunk_width; esm_dot: O_d → trunk_width.
  nn::Conv mix_;

  nn::Conv head_;
};

}  // namespace t2d
