// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference computations. None of these go through the library's
// SVD, packing or backprop code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "littlebit/tensor.hpp"

namespace oracle {

using littlebit::Index;
using littlebit::Matrix;
using littlebit::Vector;

/// Singular values from the eigenvalues of the Gram matrix, descending.
inline Vector gram_singular_values(const Matrix& a) {
  const Eigen::MatrixXd gram = a.rows() >= a.cols() ? Eigen::MatrixXd(a.transpose() * a)
                                                    : Eigen::MatrixXd(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s;
}

inline Eigen::JacobiSVD<Eigen::MatrixXd> full_svd(const Matrix& a) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
}

/// Best rank-k approximation from the reference SVD.
inline Matrix best_rank_k(const Matrix& a, Index k) {
  const auto svd = full_svd(a);
  return svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() *
         svd.matrixV().leftCols(k).transpose();
}

/// y_j = sum_i x_i s_ij, plain loops.
inline Vector sign_gemv_right(const Vector& x, const Matrix& s) {
  Vector y = Vector::Zero(s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) y(j) += x(i) * (s(i, j) < 0 ? -1.0 : 1.0);
  }
  return y;
}

/// y_i = sum_j z_j s_ij, plain loops.
inline Vector sign_gemv_left(const Vector& z, const Matrix& s) {
  Vector y = Vector::Zero(s.rows());
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) y(i) += z(j) * (s(i, j) < 0 ? -1.0 : 1.0);
  }
  return y;
}

/// W_ij = h_i * sum_k U_ik ell_k V_jk * g_j.
inline Matrix effective_weight(const Matrix& u, const Vector& ell, const Matrix& v, const Vector& h,
                               const Vector& g) {
  Matrix w = Matrix::Zero(u.rows(), v.rows());
  for (Index i = 0; i < u.rows(); ++i) {
    for (Index j = 0; j < v.rows(); ++j) {
      double acc = 0;
      for (Index k = 0; k < u.cols(); ++k) acc += u(i, k) * ell(k) * v(j, k);
      w(i, j) = h(i) * acc * g(j);
    }
  }
  return w;
}

/// (f(p + step) - f(p - step)) / (2 step) for one scalar parameter, restored afterwards.
inline double central_difference(double& param, double step, const std::function<double()>& f) {
  const double saved = param;
  param = saved + step;
  const double up = f();
  param = saved - step;
  const double down = f();
  param = saved;
  return (up - down) / (2 * step);
}

inline double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace oracle
