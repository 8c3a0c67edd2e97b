// SPDX-License-Identifier: Apache-2.0
#pragma once

// Empirical probes: error-vs-rank for the crude rank-1-scale quantizer,
// two-stage vs single-stage Dual-SVID, a residual on/off ablation at matched
// bits per weight, and a packed-GEMV latency microbenchmark.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "littlebit/qat.hpp"
#include "littlebit/tensor.hpp"

namespace littlebit {

struct SweepRow {
  double param = 0;
  Index trial = 0;  // -1 for summary rows
  std::string metric;
  double value = 0;
};

struct SweepResult {
  std::string experiment;
  std::uint64_t seed = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<SweepRow> rows_out;

  /// Mean of `metric` over per-trial rows (trial >= 0), optionally restricted to one param.
  double mean(std::string_view metric) const;
  double mean(std::string_view metric, double param) const;
  /// Value of a summary row (trial == -1); throws DomainError when absent.
  double summary(std::string_view metric, double param = 0) const;
};

/// CSV: experiment,rows,cols,seed,param,trial,metric,value
std::string sweep_csv(const SweepResult& r);

/// The rank-1-scale quantizer without a latent scale:
/// (sign(U) ⊙ s_U 1^T)(sign(V) ⊙ s_V 1^T)^T. With |U| ≈ a b^T the rank-1
/// fit, s_U = a mean(b), the constant-row matrix closest to that fit.
Matrix crude_rank1_quantize(const Matrix& u, const Matrix& v);

/// For each rank and trial draws W = U V^T with Gaussian U, V and records
/// E(r) = ||W - crude(W)||_F ("error") and E(r)/||W||_F ("rel_error").
SweepResult lemma1_sweep(Index rows, Index cols, const std::vector<Index>& ranks, Index trials,
                         std::uint64_t seed);

/// Paired trials on Gaussian W: single-stage Dual-SVID at rank r1+r2 versus
/// primary r1 plus residual r2. Per trial: err_single, err_two, two_wins,
/// cond_parts (||Δ1+Δ2||_F on SVD components) and cond_sum (||Δsum||_F).
/// Summary rows: mean_err_single, mean_err_two, win_fraction.
SweepResult theorem1_probe(Index rows, Index cols, Index r1, Index r2, Index trials,
                           std::uint64_t seed);

/// Trains residual and non-residual layers at matched bits per weight on one
/// Gaussian teacher. Per bpw point (trial 0): bpw_residual, bpw_plain,
/// rank_residual, rank_plain, init_loss_*, final_loss_*.
SweepResult residual_ablation(Index rows, Index cols, const std::vector<double>& bpws,
                              const TrainConfig& cfg, const SurrogateSpec& spec,
                              std::uint64_t seed);

struct BenchShape {
  std::string name;
  Index d_out = 0;
  Index d_in = 0;
  std::vector<Index> ranks;
};

/// "llama70b-mlp", "llama70b-attn" or "llama7b-mlp". Throws DomainError otherwise.
BenchShape bench_preset(std::string_view name);

struct BenchRow {
  std::string layer;
  Index d_out = 0;
  Index d_in = 0;
  bool dense = false;
  Index rank = 0;
  double median_ns = 0;
  Index iterations = 0;
  double speedup = 1;  // dense median / this median
};

struct BenchResult {
  std::vector<BenchRow> rows;
};

struct BenchOptions {
  Index repeats = 30;
  Index warmups = 5;
  std::uint64_t seed = 1;
};

/// Dense float32 GEMV versus the packed primary-path forward at each rank,
/// batch size 1, single thread.
BenchResult gemv_bench(const std::vector<BenchShape>& shapes, const BenchOptions& opt);

/// CSV: layer,d_out,d_in,method,rank,bpw,median_ns,iterations,speedup
std::string bench_csv(const BenchResult& r);

}  // namespace littlebit
