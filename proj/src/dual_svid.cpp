// SPDX-License-Identifier: Apache-2.0
#include "littlebit/dual_svid.hpp"

#include <string>

#include "littlebit/error.hpp"

namespace littlebit {

namespace {
constexpr double kZeroResidualRel = 1e-12;

void check_rank(const Matrix& w, Index r, const char* what) {
  const Index lim = std::min(w.rows(), w.cols());
  if (r < 1 || r > lim) {
    throw RankError(std::string(what) + ": rank " + std::to_string(r) + " outside [1, " +
                    std::to_string(lim) + "]");
  }
}
}  // namespace

SplitFactors split_factors(const SvdResult<double>& svd) {
  const Vector root = svd.sigma.cwiseSqrt();
  return {svd.u * root.asDiagonal(), svd.v * root.asDiagonal()};
}

QuantPath path_from_factors(const SplitFactors& f) {
  const Rank1Result<double> mu = rank1_nonneg(f.uprime.cwiseAbs());
  const Rank1Result<double> mv = rank1_nonneg(f.vprime.cwiseAbs());
  QuantPath p;
  p.u_sign = pack_signs_of(f.uprime);
  p.v_sign = pack_signs_of(f.vprime);
  p.h = mu.left;
  p.g = mv.left;
  p.ell = mu.right.cwiseProduct(mv.right);
  return p;
}

PathInit init_path_detailed(const Matrix& w, Index r) {
  check_rank(w, r, "init_path");
  require_finite(w, "init_path");
  if (w.squaredNorm() == 0.0) throw DomainError("init_path: zero matrix");
  SplitFactors f = split_factors(truncated_svd(w, r));
  QuantPath p = path_from_factors(f);
  return {std::move(p), std::move(f)};
}

std::pair<QuantPath, InitReport> init_path(const Matrix& w, Index r) {
  PathInit init = init_path_detailed(w, r);
  InitReport rep;
  const double wn = w.norm();
  rep.frob_err_primary = (w - effective_weight(init.path)).norm();
  rep.frob_err_total = rep.frob_err_primary;
  rep.rel_err_primary = rep.frob_err_primary / wn;
  rep.rel_err_total = rep.rel_err_primary;
  rep.rank_used = r;
  return {std::move(init.path), rep};
}

QuantPath zero_contribution_path(Index d_out, Index d_in, Index r) {
  QuantPath p;
  p.u_sign = pack(Matrix::Ones(d_out, r));
  p.v_sign = pack(Matrix::Ones(d_in, r));
  p.h = Vector::Ones(d_out);
  p.g = Vector::Ones(d_in);
  p.ell = Vector::Zero(r);
  return p;
}

QuantizeResult quantize(const Matrix& w, Index r_primary, bool residual, Index r_residual) {
  check_rank(w, r_primary, "quantize");
  if (residual) check_rank(w, r_residual, "quantize (residual)");

  PathInit pri = init_path_detailed(w, r_primary);
  const double wn = w.norm();
  const Matrix err = w - effective_weight(pri.path);

  QuantizeResult out;
  out.layer.d_out = w.rows();
  out.layer.d_in = w.cols();
  out.report.rank_used = r_primary;
  out.report.frob_err_primary = err.norm();
  out.report.rel_err_primary = out.report.frob_err_primary / wn;
  out.report.frob_err_total = out.report.frob_err_primary;
  out.report.rel_err_total = out.report.rel_err_primary;
  out.layer.primary = std::move(pri.path);
  out.primary_factors = std::move(pri.factors);

  if (!residual) return out;

  out.report.rank_residual = r_residual;
  if (out.report.frob_err_primary < kZeroResidualRel * wn) {
    out.layer.residual = zero_contribution_path(w.rows(), w.cols(), r_residual);
    out.report.residual_zeroed = true;
    return out;
  }

  PathInit res = init_path_detailed(err, r_residual);
  const double total = (err - effective_weight(res.path)).norm();
  if (total > out.report.frob_err_primary) {
    res.path.ell.setZero();
    out.report.residual_zeroed = true;
  } else {
    out.report.frob_err_total = total;
    out.report.rel_err_total = total / wn;
  }
  out.layer.residual = std::move(res.path);
  out.residual_factors = std::move(res.factors);
  return out;
}

}  // namespace littlebit
