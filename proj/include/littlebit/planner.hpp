// SPDX-License-Identifier: Apache-2.0
#pragma once

// Bits-per-weight accounting for LittleBit layers and whole models.
//
// With residual compensation a layer stores two paths, each with r(d_out+d_in)
// sign bits and 16(d_out+d_in+r) scale bits:
//   b = (2r(d_out+d_in) + 32(d_out+d_in) + 32r) / (d_out*d_in)
// Without it the leading factor of two goes away.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "littlebit/tensor.hpp"

namespace littlebit {

enum class LayerKind { AttnQ, AttnK, AttnV, AttnO, Mlp, Other };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view s);

struct LayerSpec {
  std::string name;
  Index d_out = 0;
  Index d_in = 0;
  LayerKind kind = LayerKind::Other;
  Index count = 1;

  Index params() const { return d_out * d_in; }
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  Index d_model = 0;
  Index vocab = 0;
  Index embed_params = 0;      // embeddings + lm_head, kept at fp16
  Index misc_fp16_params = 0;  // norms and other small tensors, kept at fp16

  /// Parameters in the quantizable linear layers, counting repeats.
  double linear_params() const;
  double total_params() const;
};

struct LayerPlan {
  LayerSpec spec;
  Index rank = 0;
  double achieved_bpw = 0;
};

struct QuantPlan {
  std::vector<LayerPlan> layers;
  bool residual = true;
  double gqa_kv_multiplier = 1;
  double linear_bytes = 0;  // quantized linear layers only
  double weighted_bpw = 0;  // parameter-weighted over the linear layers
};

/// Scale-only cost (r = 0) in bits per weight.
double scales_only_bpw(Index d_out, Index d_in, bool residual);

/// Exact bits-per-weight for rank r (r >= 0).
double bpw_for_rank(Index d_out, Index d_in, Index r, bool residual);

/// Inverts bpw_for_rank, rounding to nearest (ties up) and clamping to >= 1.
/// Throws InfeasibleError when target_b does not exceed the scale-only cost.
Index rank_for_bpw(Index d_out, Index d_in, double target_b, bool residual);

/// Per-layer ranks for target_b. attn_k / attn_v ranks are multiplied by
/// gqa_kv_multiplier and rounded, then capped at min(d_out, d_in).
/// Throws InfeasibleError naming every layer that cannot reach the target.
QuantPlan plan_model(const ModelSpec& spec, double target_b, double gqa_kv_multiplier = 4.0,
                     bool residual = true);

/// Bytes: quantized linears at their plan BPW plus fp16 embeddings/misc.
double memory_footprint(const ModelSpec& spec, const QuantPlan& plan);

/// Bytes for the unquantized fp16 model.
double fp16_footprint(const ModelSpec& spec);

/// KV-cache reduction factor d_model / r_kv_total. Throws DomainError for r < 1.
double kv_reduction(Index d_model, Index r_kv_total);

/// Line-oriented spec: `layer <name> <d_out> <d_in> <kind> <count>` plus
/// `d_model`, `vocab`, `embed_params`, `misc_params` keys; `#` starts a comment.
ModelSpec parse_model_spec(std::string_view text);
ModelSpec load_model_spec(const std::filesystem::path& path);

/// CSV with header name,d_out,d_in,kind,rank,achieved_bpw.
std::string plan_csv(const QuantPlan& plan);

}  // namespace littlebit
