// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "littlebit/tensor.hpp"

namespace littlebit {

/// A {-1,+1} matrix stored one bit per entry.
///
/// Row-major, ceil(cols/64) 64-bit words per row, LSB-first within a word.
/// Bit 1 encodes +1 and bit 0 encodes -1. Pad bits past `cols` are zero.
class BinaryFactor {
 public:
  BinaryFactor() = default;
  /// All entries -1 (every bit clear).
  BinaryFactor(Index rows, Index cols);

  static Index words_for(Index cols) { return (cols + 63) / 64; }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index words_per_row() const { return words_per_row_; }

  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> mutable_words() { return words_; }
  std::span<const std::uint64_t> row_words(Index i) const {
    return std::span<const std::uint64_t>(words_).subspan(
        static_cast<std::size_t>(i * words_per_row_), static_cast<std::size_t>(words_per_row_));
  }

  bool bit(Index i, Index j) const {
    return (words_[static_cast<std::size_t>(i * words_per_row_ + j / 64)] >> (j % 64)) & 1u;
  }
  double sign(Index i, Index j) const { return bit(i, j) ? 1.0 : -1.0; }
  void set(Index i, Index j, bool positive);

  /// True when every bit past `cols` in each row is zero.
  bool pad_bits_clear() const;

  /// Builds a factor from raw words; throws InconsistentError on a bad count or set pad bits.
  static BinaryFactor from_words(Index rows, Index cols, std::vector<std::uint64_t> words);

  friend bool operator==(const BinaryFactor&, const BinaryFactor&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Packs an exact sign matrix. Throws DomainError for an entry outside {-1, +1}.
BinaryFactor pack(const Eigen::Ref<const Matrix>& signs);

/// Packs sign(a) with sign(0) = +1.
BinaryFactor pack_signs_of(const Eigen::Ref<const Matrix>& a);

Matrix unpack(const BinaryFactor& f);

BinaryFactor transpose(const BinaryFactor& f);

/// y_j = sum_i x_i * S_ij, i ascending. x has f.rows() entries, y has f.cols().
Vector gemv_right(const Eigen::Ref<const Vector>& x, const BinaryFactor& f);

/// y_i = sum_j z_j * S_ij, j ascending. z has f.cols() entries, y has f.rows().
Vector gemv_left(const Eigen::Ref<const Vector>& z, const BinaryFactor& f);

/// In-place variants writing into preallocated output of the right size.
void gemv_right_into(std::span<const double> x, const BinaryFactor& f, std::span<double> y);
void gemv_left_into(std::span<const double> z, const BinaryFactor& f, std::span<double> y);

}  // namespace littlebit
