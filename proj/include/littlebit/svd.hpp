// SPDX-License-Identifier: Apache-2.0
#pragma once

// Truncated SVD by one-sided (Hestenes) Jacobi and the nonnegative rank-1
// approximation used for scale extraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "littlebit/error.hpp"
#include "littlebit/tensor.hpp"

namespace littlebit {

template <typename Scalar>
struct SvdResult {
  MatrixX<Scalar> u;      // rows x k, orthonormal columns
  VectorX<Scalar> sigma;  // k, non-increasing, >= 0
  MatrixX<Scalar> v;      // cols x k, orthonormal columns

  Index rank() const { return sigma.size(); }
  MatrixX<Scalar> reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

template <typename Scalar>
struct Rank1Result {
  VectorX<Scalar> left;   // carries the magnitude
  VectorX<Scalar> right;  // unit 2-norm
};

struct JacobiOptions {
  double angle_tol = 1e-12;
  int max_sweeps = 60;
};

namespace detail {

// Orthogonalizes the columns of `g` in place and accumulates the rotations in
// `v`. Column norms are cached and refreshed at the start of every sweep.
template <typename Scalar>
void hestenes_jacobi(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& g,
                     Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& v,
                     const JacobiOptions& opt) {
  const Index m = g.rows();
  const Index n = g.cols();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar skip_tol = eps * std::sqrt(static_cast<Scalar>(std::max<Index>(m, 1)));
  VectorX<Scalar> norms2(n);

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    for (Index j = 0; j < n; ++j) norms2[j] = g.col(j).squaredNorm();
    Scalar max_angle = 0;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar alpha = norms2[p];
        const Scalar beta = norms2[q];
        if (alpha == Scalar(0) || beta == Scalar(0)) continue;
        const Scalar gamma = g.col(p).dot(g.col(q));
        if (std::abs(gamma) <= skip_tol * std::sqrt(alpha * beta)) continue;

        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        max_angle = std::max(max_angle, std::abs(std::atan(t)));

        for (Index i = 0; i < m; ++i) {
          const Scalar gp = g(i, p);
          const Scalar gq = g(i, q);
          g(i, p) = c * gp - s * gq;
          g(i, q) = s * gp + c * gq;
        }
        for (Index i = 0; i < v.rows(); ++i) {
          const Scalar vp = v(i, p);
          const Scalar vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
        norms2[p] = alpha - t * gamma;
        norms2[q] = beta + t * gamma;
      }
    }
    if (max_angle < static_cast<Scalar>(opt.angle_tol)) break;
  }
}

// Replaces column `col` of `u` by a unit vector orthogonal to columns [0, col).
template <typename Scalar, typename Mat>
void complete_orthonormal(Mat& u, Index col) {
  const Index m = u.rows();
  for (Index e = 0; e < m; ++e) {
    VectorX<Scalar> x = VectorX<Scalar>::Unit(m, e);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < col; ++j) x -= u.col(j).dot(x) * u.col(j);
    }
    const Scalar nrm = x.norm();
    if (nrm > Scalar(0.5)) {
      u.col(col) = x / nrm;
      return;
    }
  }
}

// Full thin SVD of `a` with rows >= cols.
template <typename Scalar>
SvdResult<Scalar> thin_svd_tall(const Eigen::Ref<const MatrixX<Scalar>>& a,
                                const JacobiOptions& opt) {
  using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index m = a.rows();
  const Index n = a.cols();
  ColMat g = a;
  ColMat v = ColMat::Identity(n, n);
  hestenes_jacobi<Scalar>(g, v, opt);

  VectorX<Scalar> sigma(n);
  for (Index j = 0; j < n; ++j) sigma[j] = g.col(j).norm();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return sigma[x] > sigma[y]; });

  SvdResult<Scalar> out;
  out.u.resize(m, n);
  out.v.resize(n, n);
  out.sigma.resize(n);
  const Scalar floor = std::numeric_limits<Scalar>::min() * Scalar(1e6);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.sigma[k] = sigma[src];
    out.v.col(k) = v.col(src);
    if (sigma[src] > floor) {
      out.u.col(k) = g.col(src) / sigma[src];
    } else {
      out.sigma[k] = Scalar(0);
      complete_orthonormal<Scalar>(out.u, k);
    }
  }
  return out;
}

}  // namespace detail

/// Top-k singular triplets of `a` (1 <= k <= min(rows, cols)).
///
/// Each pair (u_i, v_i) is sign-normalized so the entry of largest magnitude
/// in u_i is positive.
template <typename Derived>
SvdResult<typename Derived::Scalar> truncated_svd(const Eigen::MatrixBase<Derived>& a_in, Index k,
                                                  const JacobiOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> a = a_in;
  const Index min_dim = std::min(a.rows(), a.cols());
  if (k < 1 || k > min_dim) {
    throw RankError("truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                    std::to_string(min_dim) + "]");
  }
  if (!a.allFinite()) throw NumericError("truncated_svd: non-finite input");

  SvdResult<Scalar> full;
  if (a.rows() >= a.cols()) {
    full = detail::thin_svd_tall<Scalar>(a, opt);
  } else {
    const MatrixX<Scalar> at = a.transpose();
    SvdResult<Scalar> t = detail::thin_svd_tall<Scalar>(at, opt);
    full.u = std::move(t.v);
    full.v = std::move(t.u);
    full.sigma = std::move(t.sigma);
  }

  SvdResult<Scalar> out;
  out.u = full.u.leftCols(k);
  out.v = full.v.leftCols(k);
  out.sigma = full.sigma.head(k);
  for (Index i = 0; i < k; ++i) {
    Index arg = 0;
    out.u.col(i).cwiseAbs().maxCoeff(&arg);
    if (out.u(arg, i) < Scalar(0)) {
      out.u.col(i) *= Scalar(-1);
      out.v.col(i) *= Scalar(-1);
    }
  }
  return out;
}

struct PowerOptions {
  int max_iters = 200;
  double tol = 1e-12;
};

/// Best rank-1 approximation left * right^T of an entrywise nonnegative matrix.
/// ||right||_2 = 1; both vectors are nonnegative.
template <typename Derived>
Rank1Result<typename Derived::Scalar> rank1_nonneg(const Eigen::MatrixBase<Derived>& a_in,
                                                   const PowerOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> a = a_in;
  if (!a.allFinite()) throw NumericError("rank1_nonneg: non-finite input");
  if (a.size() == 0) throw ShapeError("rank1_nonneg: empty matrix");
  if ((a.array() < Scalar(0)).any()) throw DomainError("rank1_nonneg: negative entry");
  if (!(a.array() > Scalar(0)).any()) throw DomainError("rank1_nonneg: all-zero input");

  const Index n = a.cols();
  const MatrixX<Scalar> gram = a.transpose() * a;
  VectorX<Scalar> right = VectorX<Scalar>::Constant(n, Scalar(1) / std::sqrt(Scalar(n)));
  for (int it = 0; it < opt.max_iters; ++it) {
    VectorX<Scalar> next = gram * right;
    const Scalar nrm = next.norm();
    if (!(nrm > Scalar(0))) break;
    next /= nrm;
    const Scalar change = (next - right).norm();
    right = std::move(next);
    if (change < static_cast<Scalar>(opt.tol)) break;
  }
  right = right.cwiseMax(Scalar(0));
  right /= right.norm();

  Rank1Result<Scalar> out;
  out.left = (a * right).cwiseMax(Scalar(0));
  out.right = std::move(right);
  return out;
}

}  // namespace littlebit
