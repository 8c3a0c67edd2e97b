// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace littlebit {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense row-major float64 matrix: weights, activations and factors.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// sign() with the convention sign(0) = +1, so every real maps into {-1, +1}.
template <typename Scalar>
constexpr Scalar sign_of(Scalar x) {
  return x < Scalar(0) ? Scalar(-1) : Scalar(1);
}

template <typename Derived>
auto sign_matrix(const Eigen::DenseBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return a.derived().unaryExpr([](Scalar x) { return sign_of(x); });
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& a) {
  return a.derived().allFinite();
}

/// Throws NumericError naming `what` when the matrix holds NaN/Inf.
void require_finite(const Eigen::Ref<const Matrix>& a, const char* what);

/// Deterministic generator; single owner, do not share across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gaussian(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  bool coin() { return (engine_() >> 63) != 0; }
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

/// rows x cols matrix of N(0, stddev^2) draws. Throws DomainError for stddev <= 0.
Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double stddev = 1.0);

/// Random {-1,+1} matrix.
Matrix random_signs(Rng& rng, Index rows, Index cols);

}  // namespace littlebit
