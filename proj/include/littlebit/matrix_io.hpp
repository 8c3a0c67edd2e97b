// SPDX-License-Identifier: Apache-2.0
#pragma once

// LBM1 raw matrix files: "LBM1", u32 rows, u32 cols, rows*cols float32
// row-major, all little-endian. Values widen to float64 on load.

#include <filesystem>

#include "littlebit/file_util.hpp"
#include "littlebit/tensor.hpp"

namespace littlebit {

Bytes encode_lbm1(const Matrix& m);
Matrix decode_lbm1(const Bytes& data);

Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const Matrix& m, const std::filesystem::path& path);

}  // namespace littlebit
