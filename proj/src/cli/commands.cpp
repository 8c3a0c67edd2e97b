// SPDX-License-Identifier: Apache-2.0
#include "littlebit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "littlebit/dual_svid.hpp"
#include "littlebit/error.hpp"
#include "littlebit/experiments.hpp"
#include "littlebit/file_util.hpp"
#include "littlebit/lbq_io.hpp"
#include "littlebit/matrix_io.hpp"
#include "littlebit/planner.hpp"
#include "littlebit/qat.hpp"

namespace littlebit {

namespace {

namespace fs = std::filesystem;

struct PlanArgs {
  std::string model_spec;
  double bpw = 0;
  double gqa_kv = 4.0;
  bool no_residual = false;
  std::string out;
};

struct QuantizeArgs {
  std::string in;
  std::optional<double> bpw;
  std::optional<Index> rank;
  bool no_residual = false;
  bool fp16_scales = false;
  std::string out;
  std::string report;
};

struct EvalArgs {
  std::string lbq;
  std::string ref;
  Index inputs = 64;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string lbq;
  std::string ref;
  Index steps = 500;
  double lr = 1e-3;
  std::string surrogate = "smoothsign";
  double k = 100.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string curve;
};

struct BenchArgs {
  std::string preset;
  Index repeats = 30;
  std::string out;
};

struct SweepArgs {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string out;
};

void write_text(const fs::path& path, const std::string& text, CommandOutcome& o) {
  write_file_atomic(path, text);
  o.artifacts.push_back(path);
}

double stored_rel_err(const LittleBitLayer& stored, const Matrix& w) {
  return (w - effective_weight(stored)).norm() / w.norm();
}

void require_shape(const LittleBitLayer& layer, const Matrix& w) {
  if (layer.d_out != w.rows() || layer.d_in != w.cols()) {
    throw ShapeError(fmt::format("layer is {}x{} but reference matrix is {}x{}", layer.d_out,
                                 layer.d_in, w.rows(), w.cols()));
  }
}

CommandOutcome do_plan(const PlanArgs& a) {
  CommandOutcome o;
  const ModelSpec spec = load_model_spec(a.model_spec);
  const QuantPlan plan = plan_model(spec, a.bpw, a.gqa_kv, !a.no_residual);
  write_text(a.out, plan_csv(plan), o);
  const double bytes = memory_footprint(spec, plan);
  o.summary += fmt::format("weighted_bpw {:.6f}\n", plan.weighted_bpw);
  o.summary += fmt::format("footprint_bytes {:.0f} ({:.3f} GB)\n", bytes, bytes / 1e9);
  o.summary += fmt::format("fp16_footprint_bytes {:.0f} ({:.3f} GB)\n", fp16_footprint(spec),
                           fp16_footprint(spec) / 1e9);
  if (spec.d_model > 0) {
    for (const auto& l : plan.layers) {
      if (l.spec.kind != LayerKind::AttnK) continue;
      // Cached latent width covers every path of the key projection.
      const Index r_total = l.rank * (plan.residual ? 2 : 1);
      o.summary += fmt::format("kv_latent_rank {} kv_reduction {:.2f}x\n", r_total,
                               kv_reduction(spec.d_model, r_total));
      break;
    }
  }
  return o;
}

CommandOutcome do_quantize(const QuantizeArgs& a) {
  CommandOutcome o;
  const Matrix w = load_matrix(a.in);
  const bool residual = !a.no_residual;
  Index r = 0;
  if (a.rank) {
    r = *a.rank;
  } else {
    r = std::min(rank_for_bpw(w.rows(), w.cols(), *a.bpw, residual), std::min(w.rows(), w.cols()));
  }
  const QuantizeResult q = quantize(w, r, residual, residual ? r : 0);
  const ScaleFormat fmt_ = a.fp16_scales ? ScaleFormat::Float16 : ScaleFormat::Float32;
  const LittleBitLayer stored = round_scales(q.layer, fmt_);
  const double stored_err = stored_rel_err(stored, w);
  const double bpw = measured_bpw(q.layer, 16);
  save_lbq(q.layer, a.out, fmt_);
  o.artifacts.push_back(a.out);
  if (!a.report.empty()) {
    std::string csv =
        "d_out,d_in,rank_primary,rank_residual,frob_err_primary,frob_err_total,rel_err_primary,"
        "rel_err_total,residual_zeroed,stored_rel_err,measured_bpw\n";
    const auto& rep = q.report;
    csv += fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g}\n", w.rows(),
                       w.cols(), rep.rank_used, rep.rank_residual, rep.frob_err_primary,
                       rep.frob_err_total, rep.rel_err_primary, rep.rel_err_total,
                       rep.residual_zeroed ? 1 : 0, stored_err, bpw);
    write_text(a.report, csv, o);
  }
  o.summary = fmt::format("rank {} residual {} rel_err {:.6g} stored_rel_err {:.6g} measured_bpw {:.6f}\n",
                          r, residual ? q.report.rank_residual : 0, q.report.rel_err_total, stored_err, bpw);
  return o;
}

CommandOutcome do_eval(const EvalArgs& a) {
  CommandOutcome o;
  if (a.inputs < 1) throw DomainError("--inputs must be >= 1");
  const LittleBitLayer layer = load_lbq(a.lbq);
  const Matrix w = load_matrix(a.ref);
  require_shape(layer, w);
  const double frob = (w - effective_weight(layer)).norm();
  const double rel = stored_rel_err(layer, w);
  Rng rng(a.seed);
  const Matrix x = gaussian_matrix(rng, a.inputs, layer.d_in);
  const double mse = distillation_loss(layer, w, x);
  std::string csv = "frob_err,rel_err,output_mse,inputs,seed\n";
  csv += fmt::format("{:.17g},{:.17g},{:.17g},{},{}\n", frob, rel, mse, a.inputs, a.seed);
  write_text(a.out, csv, o);
  o.summary = fmt::format("frob_err {:.6g} rel_err {:.6g} output_mse {:.6g}\n", frob, rel, mse);
  return o;
}

CommandOutcome do_train(const TrainArgs& a) {
  CommandOutcome o;
  if (a.steps < 0) throw DomainError("--steps must be >= 0");
  if (!(a.lr >= 0) || !std::isfinite(a.lr)) throw DomainError("--lr must be finite and >= 0");
  if (!(a.k > 0) || !std::isfinite(a.k)) throw DomainError("--k must be finite and > 0");
  const LoadedLayer in = load_lbq_with_format(a.lbq);
  const Matrix w = load_matrix(a.ref);
  require_shape(in.layer, w);
  TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.lr = a.lr;
  cfg.seed = a.seed;
  SurrogateSpec spec;
  spec.kind = a.surrogate == "ste" ? SurrogateKind::Ste : SurrogateKind::SmoothSign;
  spec.k = a.k;
  const TrainResult tr = train(in.layer, w, cfg, spec);
  // Both outputs are produced in memory first so a failure leaves neither behind.
  const Bytes lbq = encode_lbq(tr.layer, in.format);
  const std::string curve = curve_csv(tr.curve);
  write_file_atomic(a.out, lbq);
  o.artifacts.push_back(a.out);
  write_text(a.curve, curve, o);
  o.summary = fmt::format("initial_loss {:.6g} final_loss {:.6g} ratio {:.4f}\n", tr.initial_eval_loss,
                          tr.final_eval_loss,
                          tr.initial_eval_loss > 0 ? tr.final_eval_loss / tr.initial_eval_loss : 0.0);
  return o;
}

CommandOutcome do_bench(const BenchArgs& a) {
  CommandOutcome o;
  if (a.repeats < 1) throw DomainError("--repeats must be >= 1");
  BenchOptions opt;
  opt.repeats = a.repeats;
  const BenchResult r = gemv_bench({bench_preset(a.preset)}, opt);
  write_text(a.out, bench_csv(r), o);
  for (const auto& row : r.rows) {
    o.summary += fmt::format("{} rank {} median {:.0f} ns speedup {:.2f}x\n",
                             row.dense ? "dense_f32" : "packed", row.rank, row.median_ns, row.speedup);
  }
  return o;
}

/// Sweep rows for several shapes concatenated under one header.
std::string join_sweeps(const std::vector<SweepResult>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string csv = sweep_csv(parts[i]);
    if (i > 0) csv.erase(0, csv.find('\n') + 1);
    out += csv;
  }
  return out;
}

CommandOutcome do_sweep(const SweepArgs& a) {
  CommandOutcome o;
  std::string csv;
  if (a.experiment == "lemma1") {
    const SweepResult r = lemma1_sweep(64, 64, {1, 2, 4, 8, 16}, 20, a.seed);
    csv = sweep_csv(r);
    for (Index rank : {1, 2, 4, 8, 16}) {
      o.summary += fmt::format("r {} mean_rel_error {:.6f}\n", rank,
                               r.mean("rel_error", static_cast<double>(rank)));
    }
  } else if (a.experiment == "theorem1") {
    const SweepResult r = theorem1_probe(64, 64, 8, 8, 100, a.seed);
    csv = sweep_csv(r);
    o.summary = fmt::format("mean_err_single {:.6f} mean_err_two {:.6f} win_fraction {:.2f}\n",
                            r.summary("mean_err_single", 8), r.summary("mean_err_two", 8),
                            r.summary("win_fraction", 8));
  } else {
    TrainConfig cfg;
    cfg.seed = a.seed;
    const SurrogateSpec spec;
    // 0.1 BPW sits below the two-path scale-only cost of a 256x256 layer, so
    // it runs on a larger teacher.
    const std::vector<SweepResult> parts = {
        residual_ablation(256, 256, {1.0, 0.55, 0.3}, cfg, spec, a.seed),
        residual_ablation(1024, 1024, {0.1}, cfg, spec, a.seed)};
    csv = join_sweeps(parts);
    for (const auto& p : parts) {
      for (const auto& row : p.rows_out) {
        if (row.metric == "final_loss_residual" || row.metric == "final_loss_plain") {
          o.summary += fmt::format("{}x{} bpw {} {} {:.6g}\n", p.rows, p.cols, row.param, row.metric, row.value);
        }
      }
    }
  }
  write_text(a.out, csv, o);
  return o;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return kExitNumeric;
  return kExitData;
}

}  // namespace

CommandOutcome run_command(const std::vector<std::string>& args) {
  CLI::App app{"LittleBit sub-1-bit weight compression"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Per-layer ranks for a target bits-per-weight");
  plan_cmd->add_option("--model-spec", plan.model_spec, "Model spec file")->required();
  plan_cmd->add_option("--bpw", plan.bpw, "Target bits per weight")->required();
  plan_cmd->add_option("--gqa-kv", plan.gqa_kv, "Rank multiplier for attn_k / attn_v layers")
      ->capture_default_str()
      ->check(CLI::Range(1.0, 1e6));
  plan_cmd->add_flag("--no-residual", plan.no_residual, "Plan a single path per layer");
  plan_cmd->add_option("--out", plan.out, "Plan CSV")->required();

  QuantizeArgs qz;
  auto* qz_cmd = app.add_subcommand("quantize", "Dual-SVID initialization of one matrix");
  qz_cmd->add_option("--in", qz.in, "LBM1 input matrix")->required();
  auto* qz_bpw = qz_cmd->add_option("--bpw", qz.bpw, "Target bits per weight");
  auto* qz_rank = qz_cmd->add_option("--rank", qz.rank, "Latent rank per path")->check(CLI::PositiveNumber);
  qz_bpw->excludes(qz_rank);
  qz_rank->excludes(qz_bpw);
  qz_cmd->add_flag("--no-residual", qz.no_residual, "Primary path only");
  qz_cmd->add_flag("--fp16-scales", qz.fp16_scales, "Store scales in half precision");
  qz_cmd->add_option("--out", qz.out, "LBQ output")->required();
  qz_cmd->add_option("--report", qz.report, "Init report CSV");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Compare a quantized layer with its reference");
  ev_cmd->add_option("--lbq", ev.lbq, "LBQ layer")->required();
  ev_cmd->add_option("--ref", ev.ref, "LBM1 reference matrix")->required();
  ev_cmd->add_option("--inputs", ev.inputs, "Random input rows for the output MSE")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--seed", ev.seed, "Input seed")->capture_default_str();
  ev_cmd->add_option("--out", ev.out, "Metrics CSV")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Surrogate-gradient refinement against the reference");
  tr_cmd->add_option("--lbq", tr.lbq, "LBQ input")->required();
  tr_cmd->add_option("--ref", tr.ref, "LBM1 teacher matrix")->required();
  tr_cmd->add_option("--steps", tr.steps, "Optimizer steps")->required()->check(CLI::NonNegativeNumber);
  tr_cmd->add_option("--lr", tr.lr, "Peak learning rate")->required();
  tr_cmd->add_option("--surrogate", tr.surrogate, "Backward rule for sign()")
      ->capture_default_str()
      ->check(CLI::IsMember({"smoothsign", "ste"}));
  tr_cmd->add_option("--k", tr.k, "SmoothSign steepness")->capture_default_str();
  tr_cmd->add_option("--seed", tr.seed, "Batch seed")->required();
  tr_cmd->add_option("--out", tr.out, "LBQ output")->required();
  tr_cmd->add_option("--curve", tr.curve, "Loss curve CSV")->required();

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "Packed GEMV versus dense float32");
  bn_cmd->add_option("--preset", bn.preset, "Layer shape and ranks")
      ->required()
      ->check(CLI::IsMember({"llama70b-mlp", "llama70b-attn", "llama7b-mlp"}));
  bn_cmd->add_option("--repeats", bn.repeats, "Timed repetitions")->capture_default_str()->check(CLI::PositiveNumber);
  bn_cmd->add_option("--out", bn.out, "Latency CSV")->required();

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Error-vs-rank and residual probes");
  sw_cmd->add_option("--experiment", sw.experiment, "Probe to run")
      ->required()
      ->check(CLI::IsMember({"lemma1", "theorem1", "residual"}));
  sw_cmd->add_option("--seed", sw.seed, "Random seed")->capture_default_str();
  sw_cmd->add_option("--out", sw.out, "Sweep CSV")->required();

  CommandOutcome o;
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    if (qz_cmd->parsed() && !qz.bpw && !qz.rank) {
      throw CLI::RequiredError("quantize needs one of --bpw or --rank");
    }
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    o.summary = target->help();
    return o;
  } catch (const CLI::CallForAllHelp&) {
    o.summary = app.help("", CLI::AppFormatMode::All);
    return o;
  } catch (const CLI::ParseError& e) {
    o.exit_code = kExitUsage;
    o.summary = std::string(e.what()) + "\n";
    return o;
  }

  try {
    if (plan_cmd->parsed()) return do_plan(plan);
    if (qz_cmd->parsed()) return do_quantize(qz);
    if (ev_cmd->parsed()) return do_eval(ev);
    if (tr_cmd->parsed()) return do_train(tr);
    if (bn_cmd->parsed()) return do_bench(bn);
    return do_sweep(sw);
  } catch (const Error& e) {
    o.exit_code = exit_code_for(e);
    o.summary = std::string("error: ") + e.what() + "\n";
  } catch (const std::bad_alloc&) {
    o.exit_code = kExitData;
    o.summary = "error: out of memory\n";
  }
  return o;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  const CommandOutcome o = run_command(args);
  (o.exit_code == kExitOk ? std::cout : std::cerr) << o.summary;
  return o.exit_code;
}

}  // namespace littlebit
