// SPDX-License-Identifier: Apache-2.0
#include "littlebit/tensor.hpp"

#include <string>

#include "littlebit/error.hpp"

namespace littlebit {

void require_finite(const Eigen::Ref<const Matrix>& a, const char* what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double stddev) {
  if (!(stddev > 0.0)) {
    throw DomainError("gaussian_matrix: stddev must be positive");
  }
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng.engine());
  }
  return m;
}

Matrix random_signs(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.coin() ? 1.0 : -1.0;
  }
  return m;
}

}  // namespace littlebit
