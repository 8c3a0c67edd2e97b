// SPDX-License-Identifier: Apache-2.0
#pragma once

// SVD-derived initialization of a LittleBit layer: signs come from the
// truncated singular factors, scales from rank-1 fits of their magnitudes,
// and an optional second path is fit to the leftover error.

#include <optional>
#include <utility>

#include "littlebit/layer.hpp"
#include "littlebit/svd.hpp"

namespace littlebit {

struct InitReport {
  double frob_err_primary = 0;  // ||W - W_pri||_F
  double frob_err_total = 0;    // ||W - W_pri - W_res||_F
  double rel_err_primary = 0;
  double rel_err_total = 0;
  Index rank_used = 0;
  Index rank_residual = 0;
  /// Residual scales were zeroed because the residual fit made things worse
  /// or the residual was numerically zero.
  bool residual_zeroed = false;
};

/// U' = u diag(sqrt(sigma)), V' = v diag(sqrt(sigma)).
struct SplitFactors {
  Matrix uprime;  // d_out x k
  Matrix vprime;  // d_in x k
};

SplitFactors split_factors(const SvdResult<double>& svd);

/// Scaled-sign path from already split factors.
QuantPath path_from_factors(const SplitFactors& f);

struct PathInit {
  QuantPath path;
  SplitFactors factors;
};

/// Rank-r path for `w` plus the split factors it was built from.
PathInit init_path_detailed(const Matrix& w, Index r);

/// Rank-r path for `w`. The report fills only the primary fields.
std::pair<QuantPath, InitReport> init_path(const Matrix& w, Index r);

struct QuantizeResult {
  LittleBitLayer layer;
  InitReport report;
  SplitFactors primary_factors;
  std::optional<SplitFactors> residual_factors;
};

/// Full pipeline: primary path on W, then (optionally) a residual path on W - W_pri.
QuantizeResult quantize(const Matrix& w, Index r_primary, bool residual, Index r_residual);

/// Path with +1 signs, unit h and g, and a zero latent scale: contributes nothing.
QuantPath zero_contribution_path(Index d_out, Index d_in, Index r);

}  // namespace littlebit
