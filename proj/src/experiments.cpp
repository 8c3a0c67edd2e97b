// SPDX-License-Identifier: Apache-2.0
#include "littlebit/experiments.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

#include "littlebit/dual_svid.hpp"
#include "littlebit/error.hpp"
#include "littlebit/parallel.hpp"
#include "littlebit/planner.hpp"
#include "littlebit/svd.hpp"

namespace littlebit {

double SweepResult::mean(std::string_view metric) const {
  double sum = 0;
  Index n = 0;
  for (const auto& r : rows_out) {
    if (r.trial >= 0 && r.metric == metric) {
      sum += r.value;
      ++n;
    }
  }
  if (n == 0) throw DomainError("SweepResult: no rows for metric " + std::string(metric));
  return sum / static_cast<double>(n);
}

double SweepResult::mean(std::string_view metric, double param) const {
  double sum = 0;
  Index n = 0;
  for (const auto& r : rows_out) {
    if (r.trial >= 0 && r.metric == metric && r.param == param) {
      sum += r.value;
      ++n;
    }
  }
  if (n == 0) throw DomainError("SweepResult: no rows for metric " + std::string(metric));
  return sum / static_cast<double>(n);
}

double SweepResult::summary(std::string_view metric, double param) const {
  for (const auto& r : rows_out) {
    if (r.trial < 0 && r.metric == metric && r.param == param) return r.value;
  }
  throw DomainError("SweepResult: no summary row " + std::string(metric));
}

std::string sweep_csv(const SweepResult& r) {
  std::string out = "experiment,rows,cols,seed,param,trial,metric,value\n";
  for (const auto& row : r.rows_out) {
    out += fmt::format("{},{},{},{},{:.17g},{},{},{:.17g}\n", r.experiment, r.rows, r.cols, r.seed,
                       row.param, row.trial, row.metric, row.value);
  }
  return out;
}

namespace {

// Per-row scale s with s 1^T closest to the rank-1 fit left * right^T.
Vector row_scale(const Matrix& a) {
  const Rank1Result<double> fit = rank1_nonneg(a.cwiseAbs());
  return fit.left * fit.right.mean();
}

}  // namespace

Matrix crude_rank1_quantize(const Matrix& u, const Matrix& v) {
  const Vector su = row_scale(u);
  const Vector sv = row_scale(v);
  const Matrix qu = su.asDiagonal() * sign_matrix(u).eval();
  const Matrix qv = sv.asDiagonal() * sign_matrix(v).eval();
  return qu * qv.transpose();
}

SweepResult lemma1_sweep(Index rows, Index cols, const std::vector<Index>& ranks, Index trials,
                         std::uint64_t seed) {
  for (Index r : ranks) {
    if (r < 1 || r > std::min(rows, cols)) throw RankError("lemma1_sweep: rank outside shape bounds");
  }
  SweepResult out{"lemma1", seed, rows, cols, {}};
  Rng rng(seed);
  for (Index r : ranks) {
    for (Index t = 0; t < trials; ++t) {
      const Matrix u = gaussian_matrix(rng, rows, r);
      const Matrix v = gaussian_matrix(rng, cols, r);
      const Matrix w = u * v.transpose();
      const double e = (w - crude_rank1_quantize(u, v)).norm();
      out.rows_out.push_back({static_cast<double>(r), t, "error", e});
      out.rows_out.push_back({static_cast<double>(r), t, "rel_error", e / w.norm()});
    }
  }
  return out;
}

SweepResult theorem1_probe(Index rows, Index cols, Index r1, Index r2, Index trials,
                           std::uint64_t seed) {
  if (r1 < 1 || r2 < 0 || r1 + r2 > std::min(rows, cols)) {
    throw RankError("theorem1_probe: need r1 >= 1, r2 >= 0 and r1 + r2 <= min(rows, cols)");
  }
  SweepResult out{"theorem1", seed, rows, cols, {}};
  const auto p = static_cast<double>(r2);
  Rng rng(seed);
  Index wins = 0;
  double sum_single = 0;
  double sum_two = 0;
  for (Index t = 0; t < trials; ++t) {
    const Matrix w = gaussian_matrix(rng, rows, cols);
    const Index r = r1 + r2;
    const double e_single = quantize(w, r, false, 0).report.frob_err_total;
    const double e_two =
        r2 > 0 ? quantize(w, r1, true, r2).report.frob_err_total : quantize(w, r1, false, 0).report.frob_err_total;

    // Condition quantities on the exact SVD components.
    const SvdResult<double> svd = truncated_svd(w, r);
    const Matrix w_r = svd.reconstruct();
    const Matrix w_r1 = svd.u.leftCols(r1) * svd.sigma.head(r1).asDiagonal() * svd.v.leftCols(r1).transpose();
    const Matrix delta1 = effective_weight(init_path(w_r1, r1).first) - w_r1;
    Matrix delta2 = Matrix::Zero(rows, cols);
    if (r2 > 0) {
      const Matrix res = w_r - w_r1;
      delta2 = effective_weight(init_path(res, r2).first) - res;
    }
    const Matrix delta_sum = effective_weight(init_path(w_r, r).first) - w_r;

    const bool two_wins = e_two < e_single;
    wins += two_wins ? 1 : 0;
    sum_single += e_single;
    sum_two += e_two;
    out.rows_out.push_back({p, t, "err_single", e_single});
    out.rows_out.push_back({p, t, "err_two", e_two});
    out.rows_out.push_back({p, t, "two_wins", two_wins ? 1.0 : 0.0});
    out.rows_out.push_back({p, t, "cond_parts", (delta1 + delta2).norm()});
    out.rows_out.push_back({p, t, "cond_sum", delta_sum.norm()});
  }
  const double n = static_cast<double>(std::max<Index>(1, trials));
  out.rows_out.push_back({p, -1, "mean_err_single", sum_single / n});
  out.rows_out.push_back({p, -1, "mean_err_two", sum_two / n});
  out.rows_out.push_back({p, -1, "win_fraction", static_cast<double>(wins) / n});
  return out;
}

SweepResult residual_ablation(Index rows, Index cols, const std::vector<double>& bpws,
                              const TrainConfig& cfg, const SurrogateSpec& spec,
                              std::uint64_t seed) {
  SweepResult out{"residual", seed, rows, cols, {}};
  Rng rng(seed);
  const Matrix teacher = gaussian_matrix(rng, rows, cols);
  const Index cap = std::min(rows, cols);
  for (double b : bpws) {
    const Index r_res = std::min(cap, rank_for_bpw(rows, cols, b, true));
    const Index r_plain = std::min(cap, rank_for_bpw(rows, cols, b, false));
    const QuantizeResult with_res = quantize(teacher, r_res, true, r_res);
    const QuantizeResult plain = quantize(teacher, r_plain, false, 0);
    const TrainResult tr_res = train(with_res.layer, teacher, cfg, spec);
    const TrainResult tr_plain = train(plain.layer, teacher, cfg, spec);
    const double bpw_res = measured_bpw(with_res.layer, 16);
    const double bpw_plain = measured_bpw(plain.layer, 16);
    out.rows_out.push_back({b, 0, "rank_residual", static_cast<double>(r_res)});
    out.rows_out.push_back({b, 0, "rank_plain", static_cast<double>(r_plain)});
    out.rows_out.push_back({b, 0, "bpw_residual", bpw_res});
    out.rows_out.push_back({b, 0, "bpw_plain", bpw_plain});
    out.rows_out.push_back({b, 0, "init_loss_residual", tr_res.initial_eval_loss});
    out.rows_out.push_back({b, 0, "init_loss_plain", tr_plain.initial_eval_loss});
    out.rows_out.push_back({b, 0, "final_loss_residual", tr_res.final_eval_loss});
    out.rows_out.push_back({b, 0, "final_loss_plain", tr_plain.final_eval_loss});
  }
  return out;
}

BenchShape bench_preset(std::string_view name) {
  if (name == "llama70b-mlp") return {"llama70b-mlp", 8192, 28672, {6400, 3456, 1920, 640}};
  if (name == "llama70b-attn") return {"llama70b-attn", 8192, 8192, {4096, 2272, 1216, 384}};
  if (name == "llama7b-mlp") return {"llama7b-mlp", 4096, 11008, {3072, 1664, 896, 320}};
  throw DomainError("unknown bench preset '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
std::pair<double, Index> median_ns(Fn&& fn, const BenchOptions& opt) {
  for (Index i = 0; i < opt.warmups; ++i) fn();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(opt.repeats));
  for (Index i = 0; i < opt.repeats; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const double med = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  return {med, opt.repeats};
}

QuantPath random_path(Rng& rng, Index d_out, Index d_in, Index r) {
  QuantPath p;
  p.u_sign = BinaryFactor(d_out, r);
  p.v_sign = BinaryFactor(d_in, r);
  for (auto* f : {&p.u_sign, &p.v_sign}) {
    auto words = f->mutable_words();
    for (auto& w : words) w = rng.next();
    // clear pad bits
    const Index tail = r % 64;
    if (tail != 0) {
      const std::uint64_t keep = (std::uint64_t(1) << tail) - 1;
      for (Index i = 0; i < f->rows(); ++i) words[static_cast<std::size_t>((i + 1) * f->words_per_row() - 1)] &= keep;
    }
  }
  p.h = Vector::NullaryExpr(d_out, [&] { return rng.uniform(0.5, 1.5); });
  p.g = Vector::NullaryExpr(d_in, [&] { return rng.uniform(0.5, 1.5); });
  p.ell = Vector::NullaryExpr(r, [&] { return rng.uniform(0.5, 1.5); });
  return p;
}

volatile double g_sink = 0;

}  // namespace

BenchResult gemv_bench(const std::vector<BenchShape>& shapes, const BenchOptions& opt) {
  if (opt.repeats < 1 || opt.warmups < 0) throw DomainError("gemv_bench: repeats >= 1 required");
  const unsigned saved_threads = thread_count();
  set_thread_count(1);
  BenchResult out;
  Rng rng(opt.seed);
  try {
    for (const auto& s : shapes) {
      double dense_ns = 0;
      {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(s.d_out, s.d_in);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        Eigen::VectorXf x = Eigen::VectorXf::NullaryExpr(s.d_in, [&] { return static_cast<float>(rng.uniform(-1.0, 1.0)); });
        Eigen::VectorXf y(s.d_out);
        auto [med, iters] = median_ns([&] {
          y.noalias() = w * x;
          g_sink = g_sink + y[0];
        }, opt);
        dense_ns = med;
        out.rows.push_back({s.name, s.d_out, s.d_in, true, 0, med, iters, 1.0});
      }
      const Matrix x = gaussian_matrix(rng, 1, s.d_in);
      for (Index r : s.ranks) {
        const QuantPath p = random_path(rng, s.d_out, s.d_in, r);
        auto [med, iters] = median_ns([&] {
          const Matrix y = forward(p, x);
          g_sink = g_sink + y(0, 0);
        }, opt);
        out.rows.push_back({s.name, s.d_out, s.d_in, false, r, med, iters, dense_ns / med});
      }
    }
  } catch (...) {
    set_thread_count(saved_threads);
    throw;
  }
  set_thread_count(saved_threads);
  return out;
}

std::string bench_csv(const BenchResult& r) {
  std::string out = "layer,d_out,d_in,method,rank,bpw,median_ns,iterations,speedup\n";
  for (const auto& row : r.rows) {
    const double bpw = row.dense ? 32.0 : bpw_for_rank(row.d_out, row.d_in, row.rank, false);
    out += fmt::format("{},{},{},{},{},{:.6g},{:.1f},{},{:.4f}\n", row.layer, row.d_out, row.d_in,
                       row.dense ? "dense_f32" : "littlebit_packed", row.rank, bpw, row.median_ns,
                       row.iterations, row.speedup);
  }
  return out;
}

}  // namespace littlebit
