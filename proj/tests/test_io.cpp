// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>

#include "littlebit/dual_svid.hpp"
#include "littlebit/error.hpp"
#include "littlebit/lbq_io.hpp"
#include "littlebit/matrix_io.hpp"
#include "temp_dir.hpp"

using namespace littlebit;

namespace {

Matrix float32_matrix(Rng& rng, Index r, Index c) {
  return gaussian_matrix(rng, r, c).cast<float>().cast<double>();
}

}  // namespace

TEST_CASE("LBM1 round trip and layout") {
  Rng rng(41);
  const Matrix m = float32_matrix(rng, 3, 5);
  const Bytes b = encode_lbm1(m);
  CHECK(b.size() == 12 + 4 * 15);
  CHECK(std::memcmp(b.data(), "LBM1", 4) == 0);
  CHECK(b[4] == 3);
  CHECK(b[8] == 5);
  CHECK(decode_lbm1(b) == m);
  TempDir tmp;
  save_matrix(m, tmp / "m.lbm");
  CHECK(load_matrix(tmp / "m.lbm") == m);
}

TEST_CASE("LBM1 rejects malformed files") {
  Rng rng(42);
  const Bytes good = encode_lbm1(float32_matrix(rng, 2, 2));
  Bytes bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_lbm1(bad), BadMagicError);
  CHECK_THROWS_AS(decode_lbm1(Bytes(good.begin(), good.end() - 1)), TruncatedError);
  CHECK_THROWS_AS(decode_lbm1(Bytes{}), TruncatedError);
  Bytes longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_lbm1(longer), InconsistentError);
  Matrix nan = Matrix::Zero(1, 1);
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(decode_lbm1(encode_lbm1(nan)), NumericError);
  CHECK_THROWS_AS(load_matrix("/nonexistent/file.lbm"), IoError);
}

TEST_CASE("half rounding is round-to-nearest-even") {
  CHECK(round_to_half(1.0) == 1.0);
  CHECK(half_bits(1.0) == 0x3c00);
  CHECK(half_bits(-2.0) == 0xc000);
  CHECK(half_from_bits(0x3555) == doctest::Approx(0.333251953125).epsilon(1e-15));
  // 1 + 2^-11 is halfway between 1 and 1 + 2^-10: ties to even (1.0)
  CHECK(round_to_half(1.0 + std::ldexp(1.0, -11)) == 1.0);
  CHECK(round_to_half(1.0 + 3 * std::ldexp(1.0, -11)) == 1.0 + std::ldexp(1.0, -9));
  CHECK(half_from_bits(half_bits(65504.0)) == 65504.0);
}

TEST_CASE("LBQ round trip gives bit-identical forward outputs") {
  Rng rng(43);
  const Matrix w = gaussian_matrix(rng, 40, 70);
  const Matrix x = gaussian_matrix(rng, 8, 70);
  TempDir tmp;
  for (bool residual : {false, true}) {
    for (ScaleFormat f : {ScaleFormat::Float32, ScaleFormat::Float16}) {
      const LittleBitLayer layer = quantize(w, 9, residual, residual ? 5 : 0).layer;
      const LittleBitLayer stored = round_scales(layer, f);
      save_lbq(layer, tmp / "l.lbq", f);
      const LoadedLayer back = load_lbq_with_format(tmp / "l.lbq");
      CHECK(back.format == f);
      CHECK(back.layer.has_residual() == residual);
      CHECK(forward(back.layer, x) == forward(stored, x));
      // a second round trip is exact
      CHECK(encode_lbq(back.layer, f) == encode_lbq(layer, f));
      CHECK(std::filesystem::file_size(tmp / "l.lbq") == kLbqHeaderBytes + lbq_payload_bytes(layer, f));
    }
  }
}

TEST_CASE("LBQ payload size uses whole 64-bit words per row") {
  Rng rng(44);
  LittleBitLayer layer;
  layer.d_out = 4096;
  layer.d_in = 4096;
  layer.primary.u_sign = BinaryFactor(4096, 546);
  layer.primary.v_sign = BinaryFactor(4096, 546);
  layer.primary.h = Vector::Ones(4096);
  layer.primary.g = Vector::Ones(4096);
  layer.primary.ell = Vector::Ones(546);
  layer.residual = layer.primary;
  const std::size_t words = 9;  // ceil(546 / 64)
  const std::size_t per_path = 8192 * words * 8 + (8192 + 546) * 2;
  CHECK(lbq_payload_bytes(layer, ScaleFormat::Float16) == 2 * per_path);
  CHECK(lbq_payload_bytes(layer, ScaleFormat::Float32) == 2 * (8192 * words * 8 + (8192 + 546) * 4));
}

TEST_CASE("LBQ rejects corrupted files with specific error classes") {
  Rng rng(45);
  const LittleBitLayer layer = quantize(gaussian_matrix(rng, 10, 12), 3, true, 2).layer;
  const Bytes good = encode_lbq(layer);
  CHECK_NOTHROW(decode_lbq(good));

  Bytes magic = good;
  magic[3] = '2';
  CHECK_THROWS_AS(decode_lbq(magic), BadMagicError);

  CHECK_THROWS_AS(decode_lbq(Bytes(good.begin(), good.begin() + 10)), TruncatedError);
  CHECK_THROWS_AS(decode_lbq(Bytes(good.begin(), good.end() - 1)), TruncatedError);
  CHECK_THROWS_AS(decode_lbq(Bytes{}), TruncatedError);

  Bytes version = good;
  version[4] = 9;
  CHECK_THROWS_AS(decode_lbq(version), VersionError);

  Bytes flags = good;
  flags[6] |= 0x80;
  CHECK_THROWS_AS(decode_lbq(flags), InconsistentError);

  Bytes residual_flag = good;
  residual_flag[6] &= static_cast<std::uint8_t>(~1u);
  CHECK_THROWS_AS(decode_lbq(residual_flag), InconsistentError);

  Bytes trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_lbq(trailing), InconsistentError);

  Bytes pad = good;
  pad[kLbqHeaderBytes + 7] |= 0x80;  // bit 63 of the first U word; r = 3
  CHECK_THROWS_AS(decode_lbq(pad), InconsistentError);

  // Every error above is a FormatError.
  CHECK_THROWS_AS(decode_lbq(magic), FormatError);
  CHECK_THROWS_AS(load_lbq("/nonexistent/x.lbq"), IoError);
}

TEST_CASE("LBQ header rejects absurd sizes before allocating") {
  Bytes b(kLbqHeaderBytes, 0);
  std::memcpy(b.data(), "LBQ1", 4);
  b[4] = 1;
  const std::uint32_t big = 0xffffffffu;
  std::memcpy(b.data() + 8, &big, 4);
  std::memcpy(b.data() + 12, &big, 4);
  std::memcpy(b.data() + 16, &big, 4);
  CHECK_THROWS_AS(decode_lbq(b), TruncatedError);
}

TEST_CASE("atomic write leaves no temp files behind") {
  TempDir tmp;
  write_file_atomic(tmp / "a.txt", std::string_view("hello\n"));
  write_file_atomic(tmp / "a.txt", std::string_view("bye\n"));
  const Bytes b = read_file(tmp / "a.txt");
  CHECK(std::string(b.begin(), b.end()) == "bye\n");
  CHECK(std::distance(std::filesystem::directory_iterator(tmp.path()), {}) == 1);
  CHECK_THROWS_AS(write_file_atomic("/nonexistent/dir/a.txt", std::string_view("x")), IoError);
}
