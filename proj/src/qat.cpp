// SPDX-License-Identifier: Apache-2.0
#include "littlebit/qat.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "littlebit/error.hpp"

namespace littlebit {

double surrogate_backward(double x, const SurrogateSpec& spec) {
  if (spec.kind == SurrogateKind::Ste) return 1.0;
  const double t = std::tanh(spec.k * x);
  return spec.k * (1.0 - t * t);
}

TrainablePath trainable_from(const QuantPath& p, double eps_init) {
  TrainablePath t;
  t.u_latent = unpack(p.u_sign) * eps_init;
  t.v_latent = unpack(p.v_sign) * eps_init;
  t.h = p.h;
  t.g = p.g;
  t.ell = p.ell;
  return t;
}

TrainablePath trainable_from(const QuantPath& p, const SplitFactors& f) {
  if (f.uprime.rows() != p.d_out() || f.uprime.cols() != p.rank() || f.vprime.rows() != p.d_in() ||
      f.vprime.cols() != p.rank()) {
    throw ShapeError("trainable_from: split factors do not match the path");
  }
  TrainablePath t;
  t.u_latent = f.uprime;
  t.v_latent = f.vprime;
  t.h = p.h;
  t.g = p.g;
  t.ell = p.ell;
  return t;
}

TrainableLayer trainable_from(const LittleBitLayer& layer, double eps_init) {
  TrainableLayer t;
  t.d_out = layer.d_out;
  t.d_in = layer.d_in;
  t.paths.push_back(trainable_from(layer.primary, eps_init));
  if (layer.residual) t.paths.push_back(trainable_from(*layer.residual, eps_init));
  return t;
}

TrainableLayer trainable_from(const QuantizeResult& q, LatentInit init, double eps_init) {
  if (init == LatentInit::SignEpsilon) return trainable_from(q.layer, eps_init);
  TrainableLayer t;
  t.d_out = q.layer.d_out;
  t.d_in = q.layer.d_in;
  t.paths.push_back(trainable_from(q.layer.primary, q.primary_factors));
  if (q.layer.residual) {
    t.paths.push_back(q.residual_factors ? trainable_from(*q.layer.residual, *q.residual_factors)
                                         : trainable_from(*q.layer.residual, eps_init));
  }
  return t;
}

QuantPath snapshot(const TrainablePath& p) {
  QuantPath q;
  q.u_sign = pack_signs_of(p.u_latent);
  q.v_sign = pack_signs_of(p.v_latent);
  q.h = p.h;
  q.g = p.g;
  q.ell = p.ell;
  return q;
}

LittleBitLayer snapshot(const TrainableLayer& layer) {
  LittleBitLayer out;
  out.d_out = layer.d_out;
  out.d_in = layer.d_in;
  if (layer.paths.empty()) throw ShapeError("snapshot: layer has no paths");
  out.primary = snapshot(layer.paths[0]);
  if (layer.paths.size() > 1) out.residual = snapshot(layer.paths[1]);
  return out;
}

Matrix forward(const TrainablePath& p, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != p.d_in()) throw ShapeError("forward: input width does not match d_in");
  const Index r = p.rank();
  Matrix y(x.rows(), p.d_out());
  Vector scaled(p.d_in());
  Vector latent(r);
  for (Index n = 0; n < x.rows(); ++n) {
    for (Index i = 0; i < p.d_in(); ++i) scaled[i] = x(n, i) * p.g[i];
    latent.setZero();
    for (Index i = 0; i < p.d_in(); ++i) {
      for (Index j = 0; j < r; ++j) latent[j] += scaled[i] * sign_of(p.v_latent(i, j));
    }
    for (Index j = 0; j < r; ++j) latent[j] *= p.ell[j];
    for (Index o = 0; o < p.d_out(); ++o) {
      double acc = 0.0;
      for (Index j = 0; j < r; ++j) acc += latent[j] * sign_of(p.u_latent(o, j));
      y(n, o) = acc * p.h[o];
    }
  }
  return y;
}

namespace {

struct PathActivations {
  Matrix su;  // d_out x r, sign or tanh of latents
  Matrix sv;  // d_in x r
  Matrix a;   // X ⊙ g
  Matrix b;   // A Sv
  Matrix c;   // B diag(ell)
  Matrix d;   // C Su^T
};

Matrix binarize(const Matrix& latent, const SurrogateSpec& spec, ForwardMode mode) {
  if (mode == ForwardMode::Smooth) {
    return latent.unaryExpr([k = spec.k](double v) { return std::tanh(k * v); });
  }
  return sign_matrix(latent);
}

Matrix binarize_grad(const Matrix& latent, const SurrogateSpec& spec, ForwardMode mode) {
  if (mode == ForwardMode::Smooth) {
    return latent.unaryExpr([k = spec.k](double v) {
      const double t = std::tanh(k * v);
      return k * (1.0 - t * t);
    });
  }
  return latent.unaryExpr([&spec](double v) { return surrogate_backward(v, spec); });
}

PathActivations activate(const TrainablePath& p, const Eigen::Ref<const Matrix>& x,
                         const SurrogateSpec& spec, ForwardMode mode) {
  PathActivations act;
  act.su = binarize(p.u_latent, spec, mode);
  act.sv = binarize(p.v_latent, spec, mode);
  act.a = x * p.g.asDiagonal();
  act.b = act.a * act.sv;
  act.c = act.b * p.ell.asDiagonal();
  act.d = act.c * act.su.transpose();
  return act;
}

void check_shapes(const TrainableLayer& layer, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y) {
  if (layer.paths.empty()) throw ShapeError("loss_and_grads: layer has no paths");
  if (x.cols() != layer.d_in) throw ShapeError("loss_and_grads: x width != d_in");
  if (y.rows() != x.rows() || y.cols() != layer.d_out) {
    throw ShapeError("loss_and_grads: teacher output shape mismatch");
  }
  for (const auto& p : layer.paths) {
    if (p.d_out() != layer.d_out || p.d_in() != layer.d_in || p.v_latent.cols() != p.rank() ||
        p.h.size() != p.d_out() || p.g.size() != p.d_in() || p.ell.size() != p.rank()) {
      throw ShapeError("loss_and_grads: inconsistent trainable path");
    }
  }
}

}  // namespace

LossAndGrads loss_and_grads(const TrainableLayer& layer, const Eigen::Ref<const Matrix>& x,
                            const Eigen::Ref<const Matrix>& y_teacher, const SurrogateSpec& spec,
                            ForwardMode mode) {
  check_shapes(layer, x, y_teacher);
  std::vector<PathActivations> acts;
  acts.reserve(layer.paths.size());
  Matrix y = Matrix::Zero(x.rows(), layer.d_out);
  for (const auto& p : layer.paths) {
    acts.push_back(activate(p, x, spec, mode));
    y += acts.back().d * p.h.asDiagonal();
  }
  const Matrix diff = y - y_teacher;
  const double denom = static_cast<double>(x.rows()) * static_cast<double>(layer.d_out);

  LossAndGrads out;
  out.loss = diff.squaredNorm() / denom;
  const Matrix dy = diff * (2.0 / denom);
  for (std::size_t k = 0; k < layer.paths.size(); ++k) {
    const TrainablePath& p = layer.paths[k];
    const PathActivations& act = acts[k];
    PathGrads gr;
    gr.h = dy.cwiseProduct(act.d).colwise().sum().transpose();
    const Matrix dd = dy * p.h.asDiagonal();
    const Matrix dc = dd * act.su;
    gr.u_latent = (dd.transpose() * act.c).cwiseProduct(binarize_grad(p.u_latent, spec, mode));
    gr.ell = dc.cwiseProduct(act.b).colwise().sum().transpose();
    const Matrix db = dc * p.ell.asDiagonal();
    gr.v_latent = (act.a.transpose() * db).cwiseProduct(binarize_grad(p.v_latent, spec, mode));
    const Matrix da = db * act.sv.transpose();
    gr.g = da.cwiseProduct(x).colwise().sum().transpose();
    out.grads.push_back(std::move(gr));
  }
  return out;
}

double loss_value(const TrainableLayer& layer, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y_teacher, const SurrogateSpec& spec,
                  ForwardMode mode) {
  check_shapes(layer, x, y_teacher);
  Matrix y = Matrix::Zero(x.rows(), layer.d_out);
  for (const auto& p : layer.paths) y += activate(p, x, spec, mode).d * p.h.asDiagonal();
  return (y - y_teacher).squaredNorm() / (static_cast<double>(x.rows()) * static_cast<double>(layer.d_out));
}

double learning_rate(const TrainConfig& cfg, Index step) {
  if (cfg.schedule == Schedule::Constant) return cfg.lr;
  const auto warm = static_cast<Index>(std::ceil(cfg.warmup_frac * static_cast<double>(cfg.steps)));
  if (step < warm) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  const Index decay_steps = std::max<Index>(1, cfg.steps - warm);
  const double progress = static_cast<double>(step - warm) / static_cast<double>(decay_steps);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Matrix gaussian_inputs(Rng& rng, Index rows, Index cols) { return gaussian_matrix(rng, rows, cols, 1.0); }

namespace {

// Adam moments for one tensor, updated in place.
struct AdamSlot {
  Eigen::ArrayXd m;
  Eigen::ArrayXd v;

  template <typename Param, typename Grad>
  void step(Param& param, const Grad& grad, const TrainConfig& cfg, double lr, double bc1, double bc2) {
    auto p = Eigen::Map<Eigen::ArrayXd>(param.data(), param.size());
    const auto gr = Eigen::Map<const Eigen::ArrayXd>(grad.data(), grad.size());
    if (m.size() == 0) {
      m = Eigen::ArrayXd::Zero(p.size());
      v = Eigen::ArrayXd::Zero(p.size());
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gr;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gr.square();
    p -= lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
};

struct PathSlots {
  AdamSlot u, v, h, g, ell;
};

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.beta1 > 0 && cfg.beta1 < 1 && cfg.beta2 > 0 && cfg.beta2 < 1)) {
    throw DomainError("train: Adam betas must lie in (0, 1)");
  }
  if (cfg.steps < 0 || cfg.batch < 1 || cfg.eval_rows < 1) {
    throw DomainError("train: steps >= 0, batch >= 1 and eval_rows >= 1 required");
  }
  if (!(cfg.lr >= 0) || !std::isfinite(cfg.lr)) throw DomainError("train: lr must be finite and >= 0");
}

}  // namespace

double distillation_loss(const LittleBitLayer& layer, const Matrix& teacher_w,
                         const Eigen::Ref<const Matrix>& x) {
  const Matrix y = forward(layer, x);
  const Matrix yt = x * teacher_w.transpose();
  return (y - yt).squaredNorm() / (static_cast<double>(x.rows()) * static_cast<double>(layer.d_out));
}

TrainResult train(TrainableLayer state, const Matrix& teacher_w, const TrainConfig& cfg,
                  const SurrogateSpec& spec, const InputSampler& sampler) {
  validate_config(cfg);
  if (teacher_w.rows() != state.d_out || teacher_w.cols() != state.d_in) {
    throw ShapeError(fmt::format("train: teacher is {}x{}, layer is {}x{}", teacher_w.rows(),
                                 teacher_w.cols(), state.d_out, state.d_in));
  }
  require_finite(teacher_w, "train teacher");

  Rng eval_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const Matrix x_eval = sampler(eval_rng, cfg.eval_rows, state.d_in);

  TrainResult out;
  out.initial_eval_loss = distillation_loss(snapshot(state), teacher_w, x_eval);

  Rng rng(cfg.seed);
  std::vector<PathSlots> slots(state.paths.size());
  out.curve.reserve(static_cast<std::size_t>(cfg.steps));
  for (Index step = 0; step < cfg.steps; ++step) {
    const Matrix x = sampler(rng, cfg.batch, state.d_in);
    const Matrix yt = x * teacher_w.transpose();
    LossAndGrads lg = loss_and_grads(state, x, yt, spec, ForwardMode::Sign);
    if (!std::isfinite(lg.loss)) {
      throw NumericError(fmt::format("train: loss became non-finite at step {} (lr {})", step,
                                     learning_rate(cfg, step)));
    }
    const double lr = learning_rate(cfg, step);
    out.curve.push_back({step, lg.loss, lr});
    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < state.paths.size(); ++k) {
      TrainablePath& p = state.paths[k];
      const PathGrads& gr = lg.grads[k];
      slots[k].u.step(p.u_latent, gr.u_latent, cfg, lr, bc1, bc2);
      slots[k].v.step(p.v_latent, gr.v_latent, cfg, lr, bc1, bc2);
      slots[k].h.step(p.h, gr.h, cfg, lr, bc1, bc2);
      slots[k].g.step(p.g, gr.g, cfg, lr, bc1, bc2);
      slots[k].ell.step(p.ell, gr.ell, cfg, lr, bc1, bc2);
    }
  }

  out.layer = snapshot(state);
  out.final_eval_loss = distillation_loss(out.layer, teacher_w, x_eval);
  if (!std::isfinite(out.final_eval_loss)) {
    throw NumericError("train: final loss is non-finite");
  }
  return out;
}

TrainResult train(const LittleBitLayer& layer0, const Matrix& teacher_w, const TrainConfig& cfg,
                  const SurrogateSpec& spec, const InputSampler& sampler) {
  return train(trainable_from(layer0), teacher_w, cfg, spec, sampler);
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,loss,lr\n";
  for (const auto& c : curve) out += fmt::format("{},{:.17g},{:.17g}\n", c.step, c.loss, c.lr);
  return out;
}

namespace {

void draw_half_normal(Vector& v, double sigma, Rng& rng) {
  for (Index i = 0; i < v.size(); ++i) v[i] = std::abs(rng.gaussian(0.0, sigma));
}

double baseline_sigma(BaselineInit mode, Index fan_in, Index fan_out) {
  const double fi = static_cast<double>(std::max<Index>(1, fan_in));
  const double fo = static_cast<double>(std::max<Index>(1, fan_out));
  return mode == BaselineInit::HeLike ? std::sqrt(2.0 / fi) : std::sqrt(2.0 / (fi + fo));
}

void baseline_path(QuantPath& p, BaselineInit mode, Rng& rng) {
  const Index r = p.rank();
  draw_half_normal(p.g, baseline_sigma(mode, p.d_in(), r), rng);
  draw_half_normal(p.ell, baseline_sigma(mode, r, r), rng);
  draw_half_normal(p.h, baseline_sigma(mode, r, p.d_out()), rng);
}

}  // namespace

LittleBitLayer init_baseline_scales(const LittleBitLayer& layer, BaselineInit mode, Rng& rng) {
  LittleBitLayer out = layer;
  baseline_path(out.primary, mode, rng);
  if (out.residual) baseline_path(*out.residual, mode, rng);
  return out;
}

}  // namespace littlebit
