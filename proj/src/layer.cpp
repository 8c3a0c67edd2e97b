// SPDX-License-Identifier: Apache-2.0
#include "littlebit/layer.hpp"

#include <string>
#include <vector>

#include "littlebit/error.hpp"
#include "littlebit/parallel.hpp"

namespace littlebit {

void QuantPath::validate() const {
  if (v_sign.cols() != u_sign.cols()) {
    throw ShapeError("QuantPath: U_sign rank " + std::to_string(u_sign.cols()) +
                     " != V_sign rank " + std::to_string(v_sign.cols()));
  }
  if (h.size() != d_out() || g.size() != d_in() || ell.size() != rank()) {
    throw ShapeError("QuantPath: scale vector lengths disagree with factor shapes");
  }
  if (!h.allFinite() || !g.allFinite() || !ell.allFinite()) {
    throw NumericError("QuantPath: non-finite scale");
  }
}

void LittleBitLayer::validate() const {
  primary.validate();
  if (primary.d_out() != d_out || primary.d_in() != d_in) {
    throw ShapeError("LittleBitLayer: primary path shape disagrees with layer");
  }
  if (residual) {
    residual->validate();
    if (residual->d_out() != d_out || residual->d_in() != d_in) {
      throw ShapeError("LittleBitLayer: residual path shape disagrees with layer");
    }
  }
}

Matrix effective_weight(const QuantPath& p) {
  return p.h.asDiagonal() * unpack(p.u_sign) * p.ell.asDiagonal() * unpack(p.v_sign).transpose() *
         p.g.asDiagonal();
}

Matrix effective_weight(const LittleBitLayer& layer) {
  Matrix w = effective_weight(layer.primary);
  if (layer.residual) w += effective_weight(*layer.residual);
  return w;
}

Matrix forward(const QuantPath& p, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != p.d_in()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                     std::to_string(p.d_in()));
  }
  const Index seq = x.rows();
  const Index r = p.rank();
  Matrix y(seq, p.d_out());
  parallel_for(
      static_cast<std::size_t>(seq),
      [&](std::size_t begin, std::size_t end) {
        Vector scaled(p.d_in());
        Vector latent(r);
        for (std::size_t row = begin; row < end; ++row) {
          const auto i = static_cast<Index>(row);
          scaled = x.row(i).transpose().cwiseProduct(p.g);
          gemv_right_into({scaled.data(), static_cast<std::size_t>(scaled.size())}, p.v_sign,
                          {latent.data(), static_cast<std::size_t>(r)});
          latent.array() *= p.ell.array();
          double* out = y.row(i).data();
          gemv_left_into({latent.data(), static_cast<std::size_t>(r)}, p.u_sign,
                         {out, static_cast<std::size_t>(p.d_out())});
          y.row(i).array() *= p.h.transpose().array();
        }
      },
      16);
  return y;
}

Matrix forward(const LittleBitLayer& layer, const Eigen::Ref<const Matrix>& x) {
  Matrix y = forward(layer.primary, x);
  if (layer.residual) y += forward(*layer.residual, x);
  return y;
}

namespace {
double path_bits(const QuantPath& p, int scale_bits) {
  const double dims = static_cast<double>(p.d_out() + p.d_in());
  const double r = static_cast<double>(p.rank());
  return r * dims + scale_bits * (dims + r);
}
}  // namespace

double measured_bpw(const LittleBitLayer& layer, int scale_bits) {
  if (scale_bits != 16 && scale_bits != 32) {
    throw DomainError("measured_bpw: scale_bits must be 16 or 32");
  }
  double bits = path_bits(layer.primary, scale_bits);
  if (layer.residual) bits += path_bits(*layer.residual, scale_bits);
  return bits / (static_cast<double>(layer.d_out) * static_cast<double>(layer.d_in));
}

}  // namespace littlebit
