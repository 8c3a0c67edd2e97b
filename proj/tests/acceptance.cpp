// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures (0 when everything passes).

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "littlebit/error.hpp"
#include "littlebit/experiments.hpp"
#include "littlebit/lbq_io.hpp"
#include "littlebit/planner.hpp"
#include "littlebit/qat.hpp"
#include "oracles.hpp"

using namespace littlebit;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

QuantPath random_path(Rng& rng, Index d_out, Index d_in, Index r) {
  QuantPath p;
  p.u_sign = pack(random_signs(rng, d_out, r));
  p.v_sign = pack(random_signs(rng, d_in, r));
  p.h = gaussian_matrix(rng, d_out, 1);
  p.g = gaussian_matrix(rng, d_in, 1);
  p.ell = gaussian_matrix(rng, r, 1).cwiseAbs();
  return p;
}

Index draw(Rng& rng, Index lo, Index hi) { return lo + static_cast<Index>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1)); }

std::string read_text(const std::filesystem::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

Verdict planner_oracle() {
  const Index r1 = rank_for_bpw(4096, 4096, 0.55, true);
  const double b1 = bpw_for_rank(4096, 4096, r1, true);
  const Index r2 = rank_for_bpw(4096, 11008, 0.1, true);
  const double b2 = bpw_for_rank(4096, 11008, r2, true);
  const bool ok = r1 == 546 && std::abs(b1 - 0.5498) <= 1e-4 && r2 == 133 && std::abs(b2 - 0.0999) <= 1e-4;
  return {ok, fmt::format("r=546? {} (b={:.5f}); r=133? {} (b={:.5f})", r1, b1, r2, b2)};
}

Verdict forward_equivalence() {
  Rng rng(1001);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const Index d_out = draw(rng, 1, 512);
    const Index d_in = draw(rng, 1, 512);
    LittleBitLayer layer{d_out, d_in, random_path(rng, d_out, d_in, draw(rng, 1, 64)), std::nullopt};
    if (t % 2) layer.residual = random_path(rng, d_out, d_in, draw(rng, 1, 64));
    const Matrix x = gaussian_matrix(rng, 4, d_in);
    const Matrix ref = x * effective_weight(layer).transpose();
    worst = std::max(worst, oracle::rel_fro(forward(layer, x), ref));
  }
  return {worst < 1e-9, fmt::format("max relative error {:.3e} over 100 layers (< 1e-9)", worst)};
}

Verdict packed_kernels() {
  Rng rng(1002);
  double worst = 0;
  Index unaligned = 0;
  for (int c = 0; c < 200; ++c) {
    const Index rows = draw(rng, 1, 300);
    const Index cols = draw(rng, 1, 300);
    unaligned += cols % 64 != 0 ? 1 : 0;
    const Matrix s = random_signs(rng, rows, cols);
    const BinaryFactor f = pack(s);
    const Vector x = gaussian_matrix(rng, rows, 1);
    const Vector z = gaussian_matrix(rng, cols, 1);
    worst = std::max(worst, (gemv_right(x, f) - oracle::sign_gemv_right(x, s)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (gemv_left(z, f) - oracle::sign_gemv_left(z, s)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10 && unaligned > 0,
          fmt::format("max abs diff {:.3e} over 200 cases, {} with width % 64 != 0 (< 1e-10)", worst, unaligned)};
}

Verdict dual_svid_recovery() {
  Rng rng(1003);
  double worst_rel = 0;
  for (int t = 0; t < 20; ++t) {
    const Index m = draw(rng, 2, 64);
    const Index n = draw(rng, 2, 64);
    const Vector a = gaussian_matrix(rng, m, 1).cwiseAbs().array() + 0.05;
    const Vector b = gaussian_matrix(rng, n, 1).cwiseAbs().array() + 0.05;
    const Matrix w = a.asDiagonal() * (random_signs(rng, m, 1) * random_signs(rng, 1, n)) * b.asDiagonal();
    worst_rel = std::max(worst_rel, quantize(w, 1, false, 0).report.rel_err_primary);
  }
  Index violations = 0;
  for (int t = 0; t < 100; ++t) {
    const Index m = draw(rng, 4, 64);
    const Index n = draw(rng, 4, 64);
    const Matrix w = gaussian_matrix(rng, m, n);
    const Index cap = std::min(m, n);
    const InitReport rep = quantize(w, draw(rng, 1, cap / 2), true, draw(rng, 1, cap / 2)).report;
    violations += rep.frob_err_total <= rep.frob_err_primary ? 0 : 1;
  }
  return {worst_rel < 1e-9 && violations == 0,
          fmt::format("rank-1 recovery max rel err {:.3e} (< 1e-9); guard violations {}/100", worst_rel, violations)};
}

Verdict gradient_check() {
  Rng rng(1004);
  const SurrogateSpec spec{SurrogateKind::SmoothSign, 5.0};
  double worst = 0;
  for (int c = 0; c < 30; ++c) {
    const Index d_out = draw(rng, 1, 6);
    const Index d_in = draw(rng, 1, 6);
    auto make = [&](Index r) {
      TrainablePath p;
      p.u_latent = gaussian_matrix(rng, d_out, r, 0.3);
      p.v_latent = gaussian_matrix(rng, d_in, r, 0.3);
      p.h = gaussian_matrix(rng, d_out, 1);
      p.g = gaussian_matrix(rng, d_in, 1);
      p.ell = gaussian_matrix(rng, r, 1);
      return p;
    };
    TrainableLayer layer{d_out, d_in, {make(draw(rng, 1, 4))}};
    if (c % 2) layer.paths.push_back(make(draw(rng, 1, 3)));
    const Matrix x = gaussian_matrix(rng, 4, d_in);
    const Matrix yt = gaussian_matrix(rng, 4, d_out);
    const LossAndGrads lg = loss_and_grads(layer, x, yt, spec, ForwardMode::Smooth);
    auto f = [&] { return loss_value(layer, x, yt, spec, ForwardMode::Smooth); };
    auto compare = [&](auto& param, const auto& grad) {
      Eigen::VectorXd fd(param.size()), an(param.size());
      for (Index i = 0; i < param.size(); ++i) {
        fd(i) = oracle::central_difference(param.data()[i], 1e-5, f);
        an(i) = grad.data()[i];
      }
      worst = std::max(worst, (an - fd).norm() / std::max(fd.norm(), 1e-10));
    };
    for (std::size_t k = 0; k < layer.paths.size(); ++k) {
      compare(layer.paths[k].u_latent, lg.grads[k].u_latent);
      compare(layer.paths[k].v_latent, lg.grads[k].v_latent);
      compare(layer.paths[k].h, lg.grads[k].h);
      compare(layer.paths[k].g, lg.grads[k].g);
      compare(layer.paths[k].ell, lg.grads[k].ell);
    }
  }
  return {worst < 1e-4, fmt::format("max relative error {:.3e} over 30 configurations (< 1e-4)", worst)};
}

Verdict training_efficacy() {
  Rng rng(42);
  const Matrix w = gaussian_matrix(rng, 256, 256);
  const Index r = rank_for_bpw(256, 256, 0.3, true);
  const QuantizeResult q = quantize(w, r, true, r);
  TrainConfig cfg;
  cfg.seed = 42;
  const TrainResult tr = train(q.layer, w, cfg, SurrogateSpec{});
  const double ratio = tr.final_eval_loss / tr.initial_eval_loss;
  const std::string fixture = read_text(std::filesystem::path(LITTLEBIT_FIXTURE_DIR) / "train_curve_256_bpw0.3_seed42.csv");
  const bool same = curve_csv(tr.curve) == fixture;
  // Any layer of rank <= 2r is bounded below by the discarded singular values.
  const Vector s = oracle::full_svd(w).singularValues();
  const double floor = s.tail(s.size() - 2 * r).squaredNorm() / w.squaredNorm();
  const double init_rel = q.report.rel_err_total * q.report.rel_err_total;
  return {ratio <= 0.7 && same,
          fmt::format("final/initial {:.4f} (<= 0.7); curve matches fixture: {}; r={} per path, so rank <= {} and "
                      "||W - W_hat||^2/||W||^2 >= {:.4f} vs {:.4f} at init, best possible ratio ~{:.3f}",
                      ratio, same ? "yes" : "no", r, 2 * r, floor, init_rel, floor / init_rel)};
}

Verdict init_quality() {
  Rng rng(1007);
  int wins = 0;
  for (int t = 0; t < 100; ++t) {
    const Matrix w = gaussian_matrix(rng, 128, 128);
    const QuantizeResult q = quantize(w, 8, true, 8);
    const Matrix x = gaussian_matrix(rng, 256, 128);
    const double dual = distillation_loss(q.layer, w, x);
    const double he = distillation_loss(init_baseline_scales(q.layer, BaselineInit::HeLike, rng), w, x);
    const double xavier = distillation_loss(init_baseline_scales(q.layer, BaselineInit::XavierLike, rng), w, x);
    wins += dual < he && dual < xavier ? 1 : 0;
  }
  return {wins >= 95, fmt::format("Dual-SVID initial loss below both baselines in {}/100 trials (>= 95)", wins)};
}

Verdict theorem1() {
  const SweepResult r = theorem1_probe(64, 64, 8, 8, 100, 1);
  const double single = r.summary("mean_err_single", 8);
  const double two = r.summary("mean_err_two", 8);
  return {two <= single, fmt::format("mean error two-stage {:.4f} <= single-stage {:.4f}; win fraction {:.2f}", two,
                                     single, r.summary("win_fraction", 8))};
}

Verdict memory_estimator() {
  const ModelSpec spec = load_model_spec(std::filesystem::path(LITTLEBIT_CONFIG_DIR) / "llama2-7b.spec");
  const double fp16 = fp16_footprint(spec) / 1e9;
  const double gb01 = memory_footprint(spec, plan_model(spec, 0.1, 1.0, true)) / 1e9;
  const double gb03 = memory_footprint(spec, plan_model(spec, 0.3, 1.0, true)) / 1e9;
  const bool ok = std::abs(gb01 / 0.63 - 1) <= 0.10 && std::abs(gb03 / 0.79 - 1) <= 0.10 &&
                  std::abs(fp16 / 13.49 - 1) <= 0.02;
  return {ok, fmt::format("0.1 BPW {:.3f} GB (0.63 +-10%), 0.3 BPW {:.3f} GB (0.79 +-10%), FP16 {:.3f} GB (13.49 +-2%)",
                          gb01, gb03, fp16)};
}

Verdict kv() {
  const double a = kv_reduction(4096, 192);
  const double b = kv_reduction(4096, 600);
  return {std::abs(a - 21.33) <= 0.1 && std::abs(b - 6.83) <= 0.1,
          fmt::format("(4096,192) -> {:.3f}, (4096,600) -> {:.3f}", a, b)};
}

Verdict latency() {
  const BenchResult r = gemv_bench({bench_preset("llama7b-mlp")}, BenchOptions{});
  bool decreasing = true;
  std::string medians;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    medians += fmt::format("{}{}:{:.2f}ms", i > 1 ? " " : "", r.rows[i].rank, r.rows[i].median_ns / 1e6);
    if (i > 1 && !(r.rows[i].median_ns < r.rows[i - 1].median_ns)) decreasing = false;
  }
  const double speedup = r.rows.back().speedup;
  return {decreasing && speedup >= 1.5,
          fmt::format("dense {:.2f}ms, packed {}; strictly decreasing: {}; r=320 speedup {:.2f}x (>= 1.5x)",
                      r.rows[0].median_ns / 1e6, medians, decreasing ? "yes" : "no", speedup)};
}

Verdict serialization() {
  Rng rng(1012);
  const Matrix w = gaussian_matrix(rng, 96, 130);
  const Matrix x = gaussian_matrix(rng, 8, 130);
  bool identical = true;
  for (ScaleFormat f : {ScaleFormat::Float32, ScaleFormat::Float16}) {
    const LittleBitLayer layer = quantize(w, 70, true, 70).layer;
    const LoadedLayer back = decode_lbq(encode_lbq(layer, f));
    identical = identical && forward(back.layer, x) == forward(round_scales(layer, f), x) &&
                forward(decode_lbq(encode_lbq(back.layer, f)).layer, x) == forward(back.layer, x);
  }
  const Bytes good = encode_lbq(quantize(w, 4, true, 4).layer);
  Bytes magic = good;
  magic[0] = 'X';
  bool bad_magic = false, truncated = false;
  try {
    decode_lbq(magic);
  } catch (const BadMagicError&) {
    bad_magic = true;
  }
  try {
    decode_lbq(Bytes(good.begin(), good.end() - 5));
  } catch (const TruncatedError&) {
    truncated = true;
  }
  return {identical && bad_magic && truncated,
          fmt::format("bit-identical forward after round trip: {}; bad magic -> BadMagicError: {}; truncated -> "
                      "TruncatedError: {}",
                      identical ? "yes" : "no", bad_magic ? "yes" : "no", truncated ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"planner oracle values", planner_oracle},
      {"factorized forward equivalence", forward_equivalence},
      {"packed kernel oracle equivalence", packed_kernels},
      {"Dual-SVID exact recovery and residual guard", dual_svid_recovery},
      {"surrogate gradient check", gradient_check},
      {"desk-scale training efficacy", training_efficacy},
      {"init quality vs He/Xavier-like scales", init_quality},
      {"two-stage vs single-stage error", theorem1},
      {"memory estimator", memory_estimator},
      {"KV reduction", kv},
      {"latency trend", latency},
      {"serialization", serialization},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += v.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
