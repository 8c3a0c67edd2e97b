// SPDX-License-Identifier: Apache-2.0
#pragma once

// Quantization-aware refinement of a LittleBit layer against a dense teacher.
//
// Each path keeps real-valued latent factors whose signs feed the forward
// pass; gradients reach the latents through a surrogate derivative of sign().
// The objective is the per-layer output MSE ||X W_hat^T - X W^T||^2 / (seq * d_out).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "littlebit/dual_svid.hpp"
#include "littlebit/layer.hpp"

namespace littlebit {

enum class SurrogateKind { SmoothSign, Ste };

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::SmoothSign;
  double k = 100.0;  // tanh steepness for SmoothSign
};

/// d/dx surrogate of sign(x): k (1 - tanh^2(kx)) for SmoothSign, 1 for STE.
double surrogate_backward(double x, const SurrogateSpec& spec);

/// Sign: forward uses sign(latent) and backward the surrogate.
/// Smooth: forward uses tanh(k latent) and backward its exact derivative; this
/// turns the network into a smooth function for finite-difference checks.
enum class ForwardMode { Sign, Smooth };

struct TrainablePath {
  Matrix u_latent;  // d_out x r
  Matrix v_latent;  // d_in x r
  Vector h;
  Vector g;
  Vector ell;

  Index d_out() const { return u_latent.rows(); }
  Index d_in() const { return v_latent.rows(); }
  Index rank() const { return u_latent.cols(); }
};

struct TrainableLayer {
  Index d_out = 0;
  Index d_in = 0;
  std::vector<TrainablePath> paths;  // [0] primary, [1] residual when present
};

inline constexpr double kDefaultLatentEps = 0.02;

/// Latents = U_sign * eps_init, scales copied.
TrainablePath trainable_from(const QuantPath& p, double eps_init = kDefaultLatentEps);

/// Latents seeded with the split SVD factors U', V' themselves.
TrainablePath trainable_from(const QuantPath& p, const SplitFactors& f);

TrainableLayer trainable_from(const LittleBitLayer& layer, double eps_init = kDefaultLatentEps);

enum class LatentInit { SignEpsilon, SvdFactors };

/// Builds from a quantize() result. SvdFactors falls back to SignEpsilon for a
/// residual path that has no factors (the zero-residual case).
TrainableLayer trainable_from(const QuantizeResult& q, LatentInit init,
                              double eps_init = kDefaultLatentEps);

/// sign(latent) with sign(0) = +1.
QuantPath snapshot(const TrainablePath& p);
LittleBitLayer snapshot(const TrainableLayer& layer);

/// Same accumulation order as the packed kernels, so results match
/// forward(snapshot(p), x) exactly.
Matrix forward(const TrainablePath& p, const Eigen::Ref<const Matrix>& x);

struct PathGrads {
  Matrix u_latent;
  Matrix v_latent;
  Vector h;
  Vector g;
  Vector ell;
};

struct LossAndGrads {
  double loss = 0;
  std::vector<PathGrads> grads;  // aligned with TrainableLayer::paths
};

LossAndGrads loss_and_grads(const TrainableLayer& layer, const Eigen::Ref<const Matrix>& x,
                            const Eigen::Ref<const Matrix>& y_teacher, const SurrogateSpec& spec,
                            ForwardMode mode = ForwardMode::Sign);

double loss_value(const TrainableLayer& layer, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y_teacher, const SurrogateSpec& spec,
                  ForwardMode mode = ForwardMode::Sign);

enum class Schedule { Constant, Cosine };

struct TrainConfig {
  Index steps = 500;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Index batch = 32;
  std::uint64_t seed = 0;
  double warmup_frac = 0.02;
  Schedule schedule = Schedule::Cosine;
  Index eval_rows = 256;  // fixed held-out batch for initial/final loss
};

/// Linear warm-up over ceil(warmup_frac * steps) steps, then cosine decay to 0
/// (or constant). `step` is zero-based.
double learning_rate(const TrainConfig& cfg, Index step);

struct CurvePoint {
  Index step = 0;
  double loss = 0;
  double lr = 0;
};

struct TrainResult {
  LittleBitLayer layer;
  std::vector<CurvePoint> curve;
  double initial_eval_loss = 0;
  double final_eval_loss = 0;
};

/// Draws a rows x cols input batch.
using InputSampler = std::function<Matrix(Rng&, Index rows, Index cols)>;

/// Standard Gaussian inputs.
Matrix gaussian_inputs(Rng& rng, Index rows, Index cols);

/// Adam on every latent and scale. Throws NumericError if the loss goes non-finite.
TrainResult train(TrainableLayer init, const Matrix& teacher_w, const TrainConfig& cfg,
                  const SurrogateSpec& spec, const InputSampler& sampler = gaussian_inputs);

TrainResult train(const LittleBitLayer& layer0, const Matrix& teacher_w, const TrainConfig& cfg,
                  const SurrogateSpec& spec, const InputSampler& sampler = gaussian_inputs);

/// CSV with header step,loss,lr.
std::string curve_csv(const std::vector<CurvePoint>& curve);

enum class BaselineInit { HeLike, XavierLike };

/// Replaces every path's h, g, ell by positive half-normal draws, keeping signs.
/// Each vector is treated as a layer with (fan_in, fan_out):
///   g: (d_in, r)   ell: (r, r)   h: (r, d_out)
/// He-like uses sigma = sqrt(2 / fan_in), Xavier-like sigma = sqrt(2 / (fan_in + fan_out)).
LittleBitLayer init_baseline_scales(const LittleBitLayer& layer, BaselineInit mode, Rng& rng);

/// Output MSE of a layer against a dense teacher on the given inputs.
double distillation_loss(const LittleBitLayer& layer, const Matrix& teacher_w,
                         const Eigen::Ref<const Matrix>& x);

}  // namespace littlebit
