// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "littlebit/error.hpp"
#include "littlebit/layer.hpp"
#include "littlebit/parallel.hpp"
#include "oracles.hpp"

using namespace littlebit;

namespace {

QuantPath random_path(Rng& rng, Index d_out, Index d_in, Index r) {
  QuantPath p;
  p.u_sign = pack(random_signs(rng, d_out, r));
  p.v_sign = pack(random_signs(rng, d_in, r));
  p.h = gaussian_matrix(rng, d_out, 1);
  p.g = gaussian_matrix(rng, d_in, 1);
  p.ell = gaussian_matrix(rng, r, 1).cwiseAbs();
  return p;
}

}  // namespace

TEST_CASE("effective_weight matches the triple-loop oracle") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const QuantPath p = random_path(rng, 1 + t * 3, 2 + t * 5, 1 + t * 7);
    const Matrix ref = oracle::effective_weight(unpack(p.u_sign), p.ell, unpack(p.v_sign), p.h, p.g);
    CHECK((effective_weight(p) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("factorized forward equals X W_hat^T for random layers") {
  Rng rng(32);
  for (int t = 0; t < 100; ++t) {
    const Index d_out = 1 + static_cast<Index>(rng.next() % 96);
    const Index d_in = 1 + static_cast<Index>(rng.next() % 96);
    const Index r = 1 + static_cast<Index>(rng.next() % 40);
    LittleBitLayer layer{d_out, d_in, random_path(rng, d_out, d_in, r), std::nullopt};
    if (t % 2) layer.residual = random_path(rng, d_out, d_in, 1 + static_cast<Index>(rng.next() % 40));
    const Matrix x = gaussian_matrix(rng, 5, d_in);
    const Matrix ref = x * effective_weight(layer).transpose();
    CHECK(oracle::rel_fro(forward(layer, x), ref) < 1e-9);
  }
}

TEST_CASE("forward is identical regardless of thread count") {
  Rng rng(33);
  const QuantPath p = random_path(rng, 70, 90, 65);
  const Matrix x = gaussian_matrix(rng, 64, 90);
  set_thread_count(1);
  const Matrix one = forward(p, x);
  set_thread_count(4);
  const Matrix four = forward(p, x);
  set_thread_count(0);
  CHECK(one == four);
}

TEST_CASE("forward and validate reject malformed input") {
  Rng rng(34);
  QuantPath p = random_path(rng, 4, 6, 3);
  CHECK_NOTHROW(p.validate());
  CHECK_THROWS_AS(forward(p, Matrix::Zero(2, 5)), ShapeError);
  QuantPath bad = p;
  bad.ell = Vector::Ones(2);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = p;
  bad.h(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), NumericError);
  LittleBitLayer layer{4, 6, p, random_path(rng, 4, 7, 3)};
  CHECK_THROWS_AS(layer.validate(), ShapeError);
}

TEST_CASE("measured_bpw counts sign bits and scales per path") {
  Rng rng(35);
  LittleBitLayer layer{64, 32, random_path(rng, 64, 32, 8), std::nullopt};
  const double one = (8.0 * 96 + 16.0 * (96 + 8)) / (64.0 * 32);
  CHECK(measured_bpw(layer, 16) == doctest::Approx(one).epsilon(1e-15));
  CHECK(measured_bpw(layer, 32) == doctest::Approx((8.0 * 96 + 32.0 * 104) / 2048).epsilon(1e-15));
  layer.residual = random_path(rng, 64, 32, 4);
  const double two = one + (4.0 * 96 + 16.0 * (96 + 4)) / 2048;
  CHECK(measured_bpw(layer, 16) == doctest::Approx(two).epsilon(1e-15));
  CHECK_THROWS_AS(measured_bpw(layer, 8), DomainError);
}

TEST_CASE("parallel_for covers every index once and rethrows worker errors") {
  set_thread_count(3);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t b, std::size_t) {
                    if (b > 0) throw NumericError("boom");
                  }),
                  NumericError);
  set_thread_count(0);
  CHECK(thread_count() >= 1);
}
