// SPDX-License-Identifier: Apache-2.0
#include "littlebit/bitpack.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "littlebit/error.hpp"

namespace littlebit {

namespace {

// kByteSigns[b][k] is +1.0 when bit k of b is set, else -1.0. Multiplying by
// an entry is exact, so y += x * s is the same add/sub selection as testing bits.
using ByteTable = std::array<std::array<double, 8>, 256>;

constexpr ByteTable make_byte_table() {
  ByteTable t{};
  for (int b = 0; b < 256; ++b) {
    for (int k = 0; k < 8; ++k) t[b][k] = ((b >> k) & 1) ? 1.0 : -1.0;
  }
  return t;
}

constexpr ByteTable kByteSigns = make_byte_table();

}  // namespace

BinaryFactor::BinaryFactor(Index rows, Index cols)
    : rows_(rows),
      cols_(cols),
      words_per_row_(words_for(cols)),
      words_(static_cast<std::size_t>(rows * words_for(cols)), 0u) {
  if (rows < 0 || cols < 0) throw ShapeError("BinaryFactor: negative dimension");
}

void BinaryFactor::set(Index i, Index j, bool positive) {
  auto& w = words_[static_cast<std::size_t>(i * words_per_row_ + j / 64)];
  const std::uint64_t mask = std::uint64_t(1) << (j % 64);
  w = positive ? (w | mask) : (w & ~mask);
}

bool BinaryFactor::pad_bits_clear() const {
  const Index tail = cols_ % 64;
  if (tail == 0 || rows_ == 0) return true;
  const std::uint64_t pad_mask = ~((std::uint64_t(1) << tail) - 1);
  for (Index i = 0; i < rows_; ++i) {
    if (words_[static_cast<std::size_t>(i * words_per_row_ + words_per_row_ - 1)] & pad_mask) {
      return false;
    }
  }
  return true;
}

BinaryFactor BinaryFactor::from_words(Index rows, Index cols, std::vector<std::uint64_t> words) {
  BinaryFactor f(rows, cols);
  if (static_cast<Index>(words.size()) != rows * f.words_per_row_) {
    throw InconsistentError("BinaryFactor: expected " + std::to_string(rows * f.words_per_row_) +
                            " words, got " + std::to_string(words.size()));
  }
  f.words_ = std::move(words);
  if (!f.pad_bits_clear()) throw InconsistentError("BinaryFactor: pad bits set");
  return f;
}

BinaryFactor pack(const Eigen::Ref<const Matrix>& signs) {
  BinaryFactor f(signs.rows(), signs.cols());
  for (Index i = 0; i < signs.rows(); ++i) {
    for (Index j = 0; j < signs.cols(); ++j) {
      const double s = signs(i, j);
      if (s == 1.0) {
        f.set(i, j, true);
      } else if (s != -1.0) {
        throw DomainError("pack: entry (" + std::to_string(i) + "," + std::to_string(j) +
                          ") is not +1 or -1");
      }
    }
  }
  return f;
}

BinaryFactor pack_signs_of(const Eigen::Ref<const Matrix>& a) {
  BinaryFactor f(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (!(a(i, j) < 0.0)) f.set(i, j, true);
    }
  }
  return f;
}

Matrix unpack(const BinaryFactor& f) {
  Matrix m(f.rows(), f.cols());
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) m(i, j) = f.sign(i, j);
  }
  return m;
}

BinaryFactor transpose(const BinaryFactor& f) {
  BinaryFactor t(f.cols(), f.rows());
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) {
      if (f.bit(i, j)) t.set(j, i, true);
    }
  }
  return t;
}

void gemv_right_into(std::span<const double> x, const BinaryFactor& f, std::span<double> y) {
  if (static_cast<Index>(x.size()) != f.rows() || static_cast<Index>(y.size()) != f.cols()) {
    throw ShapeError("gemv_right: x has " + std::to_string(x.size()) + " entries, factor is " +
                     std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
  }
  std::fill(y.begin(), y.end(), 0.0);
  const Index cols = f.cols();
  const Index full_bytes = cols / 8;
  const Index tail_bits = cols % 8;
  double* out = y.data();
  for (Index i = 0; i < f.rows(); ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    const auto row = f.row_words(i);
    for (Index jb = 0; jb < full_bytes; ++jb) {
      const auto byte = static_cast<std::uint8_t>(row[static_cast<std::size_t>(jb / 8)] >> (8 * (jb % 8)));
      const auto& s = kByteSigns[byte];
      double* o = out + jb * 8;
      for (int k = 0; k < 8; ++k) o[k] += xi * s[k];
    }
    if (tail_bits != 0) {
      const Index jb = full_bytes;
      const auto byte = static_cast<std::uint8_t>(row[static_cast<std::size_t>(jb / 8)] >> (8 * (jb % 8)));
      const auto& s = kByteSigns[byte];
      double* o = out + jb * 8;
      for (Index k = 0; k < tail_bits; ++k) o[k] += xi * s[static_cast<std::size_t>(k)];
    }
  }
}

namespace {

// Accumulates rows [i0, i0 + Rows) together; each row keeps its own j-ascending sum.
template <int Rows>
void gemv_left_block(const double* z, const BinaryFactor& f, Index i0, double* y) {
  const Index cols = f.cols();
  const Index full_bytes = cols / 8;
  const Index tail_bits = cols % 8;
  std::array<double, Rows> acc{};
  std::array<std::span<const std::uint64_t>, Rows> rows;
  for (int r = 0; r < Rows; ++r) rows[r] = f.row_words(i0 + r);
  for (Index jb = 0; jb < full_bytes; ++jb) {
    const double* zz = z + jb * 8;
    for (int r = 0; r < Rows; ++r) {
      const auto byte =
          static_cast<std::uint8_t>(rows[r][static_cast<std::size_t>(jb / 8)] >> (8 * (jb % 8)));
      const auto& s = kByteSigns[byte];
      double a = acc[r];
      for (int k = 0; k < 8; ++k) a += zz[k] * s[k];
      acc[r] = a;
    }
  }
  if (tail_bits != 0) {
    const Index jb = full_bytes;
    const double* zz = z + jb * 8;
    for (int r = 0; r < Rows; ++r) {
      const auto byte =
          static_cast<std::uint8_t>(rows[r][static_cast<std::size_t>(jb / 8)] >> (8 * (jb % 8)));
      const auto& s = kByteSigns[byte];
      for (Index k = 0; k < tail_bits; ++k) acc[r] += zz[k] * s[static_cast<std::size_t>(k)];
    }
  }
  for (int r = 0; r < Rows; ++r) y[i0 + r] = acc[r];
}

}  // namespace

void gemv_left_into(std::span<const double> z, const BinaryFactor& f, std::span<double> y) {
  if (static_cast<Index>(z.size()) != f.cols() || static_cast<Index>(y.size()) != f.rows()) {
    throw ShapeError("gemv_left: z has " + std::to_string(z.size()) + " entries, factor is " +
                     std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
  }
  const Index rows = f.rows();
  Index i = 0;
  for (; i + 4 <= rows; i += 4) gemv_left_block<4>(z.data(), f, i, y.data());
  for (; i < rows; ++i) gemv_left_block<1>(z.data(), f, i, y.data());
}

Vector gemv_right(const Eigen::Ref<const Vector>& x, const BinaryFactor& f) {
  if (x.size() != f.rows()) {
    throw ShapeError("gemv_right: x has " + std::to_string(x.size()) + " entries, factor has " +
                     std::to_string(f.rows()) + " rows");
  }
  Vector y(f.cols());
  gemv_right_into({x.data(), static_cast<std::size_t>(x.size())}, f,
                  {y.data(), static_cast<std::size_t>(y.size())});
  return y;
}

Vector gemv_left(const Eigen::Ref<const Vector>& z, const BinaryFactor& f) {
  if (z.size() != f.cols()) {
    throw ShapeError("gemv_left: z has " + std::to_string(z.size()) + " entries, factor has " +
                     std::to_string(f.cols()) + " cols");
  }
  Vector y(f.rows());
  gemv_left_into({z.data(), static_cast<std::size_t>(z.size())}, f,
                 {y.data(), static_cast<std::size_t>(y.size())});
  return y;
}

}  // namespace littlebit
