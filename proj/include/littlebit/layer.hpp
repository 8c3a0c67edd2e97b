// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "littlebit/bitpack.hpp"
#include "littlebit/tensor.hpp"

namespace littlebit {

/// One scaled-binary factorization diag(h) U_sign diag(ell) V_sign^T diag(g).
struct QuantPath {
  BinaryFactor u_sign;  // d_out x r
  BinaryFactor v_sign;  // d_in x r
  Vector h;             // d_out
  Vector g;             // d_in
  Vector ell;           // r

  Index d_out() const { return u_sign.rows(); }
  Index d_in() const { return v_sign.rows(); }
  Index rank() const { return u_sign.cols(); }

  /// Throws ShapeError / NumericError when the fields disagree or hold NaN/Inf.
  void validate() const;
};

/// The compressed stand-in for a dense d_out x d_in weight W.
struct LittleBitLayer {
  Index d_out = 0;
  Index d_in = 0;
  QuantPath primary;
  std::optional<QuantPath> residual;

  bool has_residual() const { return residual.has_value(); }
  void validate() const;
};

Matrix effective_weight(const QuantPath& p);

/// Sum of the path effective weights.
Matrix effective_weight(const LittleBitLayer& layer);

/// Y = ((((X ⊙ g) V_sign) ⊙ ell) U_sign^T) ⊙ h for one path; x is seq x d_in.
Matrix forward(const QuantPath& p, const Eigen::Ref<const Matrix>& x);

/// Primary output plus residual output; never forms the effective weight.
Matrix forward(const LittleBitLayer& layer, const Eigen::Ref<const Matrix>& x);

/// Sign bits plus scale_bits per stored scale, over every present path,
/// divided by d_out * d_in.
double measured_bpw(const LittleBitLayer& layer, int scale_bits);

}  // namespace littlebit
