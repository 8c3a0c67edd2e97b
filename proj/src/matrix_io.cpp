// SPDX-License-Identifier: Apache-2.0
#include "littlebit/matrix_io.hpp"

#include <cmath>
#include <limits>

namespace littlebit {

namespace {
constexpr char kMagic[4] = {'L', 'B', 'M', '1'};
}

Bytes encode_lbm1(const Matrix& m) {
  require_finite(m, "save_matrix");
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("save_matrix: dimensions exceed u32");
  }
  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put(static_cast<std::uint32_t>(m.rows()));
  w.put(static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) {
    const auto f = static_cast<float>(m.data()[i]);
    if (!std::isfinite(f)) throw NumericError("save_matrix: value overflows float32");
    w.put(f);
  }
  return w.take();
}

Matrix decode_lbm1(const Bytes& data) {
  ByteReader r(data, "LBM1");
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError("LBM1: bad magic");
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  const std::uint64_t count = std::uint64_t(rows) * cols;
  if (r.remaining() < count * sizeof(float)) {
    throw TruncatedError("LBM1: payload holds " + std::to_string(r.remaining()) +
                         " bytes, header promises " + std::to_string(count * sizeof(float)));
  }
  if (r.remaining() > count * sizeof(float)) {
    throw InconsistentError("LBM1: trailing bytes after payload");
  }
  Matrix m(rows, cols);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto f = r.get<float>();
    if (!std::isfinite(f)) throw NumericError("LBM1: non-finite entry at index " + std::to_string(i));
    m.data()[i] = f;
  }
  return m;
}

Matrix load_matrix(const std::filesystem::path& path) { return decode_lbm1(read_file(path)); }

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_lbm1(m));
}

}  // namespace littlebit
