// SPDX-License-Identifier: Apache-2.0
#include "littlebit/planner.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "littlebit/error.hpp"
#include "littlebit/file_util.hpp"

namespace littlebit {

namespace {

constexpr double kScaleBits = 16.0;

double paths(bool residual) { return residual ? 2.0 : 1.0; }

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::AttnQ: return "attn_q";
    case LayerKind::AttnK: return "attn_k";
    case LayerKind::AttnV: return "attn_v";
    case LayerKind::AttnO: return "attn_o";
    case LayerKind::Mlp: return "mlp";
    case LayerKind::Other: return "other";
  }
  return "other";
}

LayerKind parse_layer_kind(std::string_view s) {
  for (LayerKind k : {LayerKind::AttnQ, LayerKind::AttnK, LayerKind::AttnV, LayerKind::AttnO,
                      LayerKind::Mlp, LayerKind::Other}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("unknown layer kind '" + std::string(s) + "'");
}

double ModelSpec::linear_params() const {
  double n = 0;
  for (const auto& l : layers) n += static_cast<double>(l.params()) * static_cast<double>(l.count);
  return n;
}

double ModelSpec::total_params() const {
  return linear_params() + static_cast<double>(embed_params) + static_cast<double>(misc_fp16_params);
}

double scales_only_bpw(Index d_out, Index d_in, bool residual) {
  return bpw_for_rank(d_out, d_in, 0, residual);
}

double bpw_for_rank(Index d_out, Index d_in, Index r, bool residual) {
  if (d_out < 1 || d_in < 1) throw ShapeError("bpw_for_rank: dimensions must be positive");
  if (r < 0) throw RankError("bpw_for_rank: negative rank");
  const double dims = static_cast<double>(d_out + d_in);
  const double rr = static_cast<double>(r);
  const double k = paths(residual);
  const double bits = k * rr * dims + k * kScaleBits * dims + k * kScaleBits * rr;
  return bits / (static_cast<double>(d_out) * static_cast<double>(d_in));
}

Index rank_for_bpw(Index d_out, Index d_in, double target_b, bool residual) {
  if (d_out < 1 || d_in < 1) throw ShapeError("rank_for_bpw: dimensions must be positive");
  const double dims = static_cast<double>(d_out + d_in);
  const double k = paths(residual);
  const double numerator =
      target_b * static_cast<double>(d_out) * static_cast<double>(d_in) - k * kScaleBits * dims;
  if (!(numerator > 0.0)) {
    throw InfeasibleError(fmt::format("target {} bpw is at or below the scale-only cost {} for {}x{}",
                                      target_b, scales_only_bpw(d_out, d_in, residual), d_out, d_in));
  }
  const double r = numerator / (k * dims + k * kScaleBits);
  return std::max<Index>(1, static_cast<Index>(std::floor(r + 0.5)));
}

QuantPlan plan_model(const ModelSpec& spec, double target_b, double gqa_kv_multiplier, bool residual) {
  if (!(gqa_kv_multiplier >= 1.0)) throw DomainError("plan_model: gqa multiplier must be >= 1");
  QuantPlan plan;
  plan.residual = residual;
  plan.gqa_kv_multiplier = gqa_kv_multiplier;
  std::vector<std::string> infeasible;
  double bits = 0;
  double params = 0;
  for (const auto& l : spec.layers) {
    Index r = 0;
    try {
      r = rank_for_bpw(l.d_out, l.d_in, target_b, residual);
    } catch (const InfeasibleError&) {
      infeasible.push_back(l.name);
      continue;
    }
    if (l.kind == LayerKind::AttnK || l.kind == LayerKind::AttnV) {
      r = static_cast<Index>(std::floor(static_cast<double>(r) * gqa_kv_multiplier + 0.5));
    }
    r = std::min(r, std::min(l.d_out, l.d_in));
    LayerPlan lp{l, r, bpw_for_rank(l.d_out, l.d_in, r, residual)};
    bits += lp.achieved_bpw * static_cast<double>(l.params()) * static_cast<double>(l.count);
    params += static_cast<double>(l.params()) * static_cast<double>(l.count);
    plan.layers.push_back(std::move(lp));
  }
  if (!infeasible.empty()) {
    std::string names;
    for (const auto& n : infeasible) names += (names.empty() ? "" : ", ") + n;
    throw InfeasibleError(fmt::format("target {} bpw infeasible for layers: {}", target_b, names));
  }
  plan.linear_bytes = bits / 8.0;
  plan.weighted_bpw = params > 0 ? bits / params : 0.0;
  return plan;
}

double memory_footprint(const ModelSpec& spec, const QuantPlan& plan) {
  return plan.linear_bytes +
         2.0 * (static_cast<double>(spec.embed_params) + static_cast<double>(spec.misc_fp16_params));
}

double fp16_footprint(const ModelSpec& spec) { return 2.0 * spec.total_params(); }

double kv_reduction(Index d_model, Index r_kv_total) {
  if (r_kv_total < 1) throw DomainError("kv_reduction: rank must be >= 1");
  return static_cast<double>(d_model) / static_cast<double>(r_kv_total);
}

namespace {

Index parse_count(std::string_view tok, int line) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
    throw FormatError(fmt::format("model spec line {}: '{}' is not a nonnegative integer", line, tok));
  }
  return v;
}

}  // namespace

ModelSpec parse_model_spec(std::string_view text) {
  ModelSpec spec;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    if (key == "layer") {
      if (tok.size() != 6) {
        throw FormatError(fmt::format("model spec line {}: layer needs <name> <d_out> <d_in> <kind> <count>", line_no));
      }
      LayerSpec l;
      l.name = tok[1];
      l.d_out = parse_count(tok[2], line_no);
      l.d_in = parse_count(tok[3], line_no);
      l.kind = parse_layer_kind(tok[4]);
      l.count = parse_count(tok[5], line_no);
      if (l.d_out < 1 || l.d_in < 1 || l.count < 1) {
        throw FormatError(fmt::format("model spec line {}: dimensions and count must be >= 1", line_no));
      }
      spec.layers.push_back(std::move(l));
      continue;
    }
    if (tok.size() != 2) throw FormatError(fmt::format("model spec line {}: expected '<key> <value>'", line_no));
    const Index v = parse_count(tok[1], line_no);
    if (key == "d_model") {
      spec.d_model = v;
    } else if (key == "vocab") {
      spec.vocab = v;
    } else if (key == "embed_params") {
      spec.embed_params = v;
    } else if (key == "misc_params") {
      spec.misc_fp16_params = v;
    } else {
      throw FormatError(fmt::format("model spec line {}: unknown key '{}'", line_no, key));
    }
  }
  return spec;
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return parse_model_spec(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

std::string plan_csv(const QuantPlan& plan) {
  std::string out = "name,d_out,d_in,kind,rank,achieved_bpw\n";
  for (const auto& l : plan.layers) {
    out += fmt::format("{},{},{},{},{},{:.17g}\n", l.spec.name, l.spec.d_out, l.spec.d_in,
                       to_string(l.spec.kind), l.rank, l.achieved_bpw);
  }
  return out;
}

}  // namespace littlebit
