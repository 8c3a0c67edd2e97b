// SPDX-License-Identifier: Apache-2.0
#include "littlebit/lbq_io.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "littlebit/error.hpp"

namespace littlebit {

namespace {

constexpr char kMagic[4] = {'L', 'B', 'Q', '1'};
constexpr std::uint16_t kFlagResidual = 1u << 0;
constexpr std::uint16_t kFlagFp16 = 1u << 1;

double half_to_double(Eigen::half h) { return static_cast<double>(static_cast<float>(h)); }

}  // namespace

std::uint16_t half_bits(double x) {
  // Eigen converts float32 -> half with ties-to-even; going through float32
  // first can double-round, so settle between the neighbouring candidates.
  const Eigen::half first(static_cast<float>(x));
  const std::uint16_t b = Eigen::numext::bit_cast<std::uint16_t>(first);
  if (!std::isfinite(x) || (b & 0x7fffu) >= 0x7c00u) return b;
  std::uint16_t best = b;
  double best_err = std::abs(half_to_double(first) - x);
  for (int delta : {-1, 1}) {
    const int cand = static_cast<int>(b) + delta;
    if (cand < 0 || cand > 0xffff) continue;
    const auto cb = static_cast<std::uint16_t>(cand);
    if ((cb & 0x7fffu) >= 0x7c00u) continue;
    // Stepping across the sign boundary is meaningless for neighbours.
    if ((cb & 0x8000u) != (b & 0x8000u)) continue;
    const double err = std::abs(half_to_double(Eigen::numext::bit_cast<Eigen::half>(cb)) - x);
    if (err < best_err || (err == best_err && (cb & 1u) == 0 && (best & 1u) != 0)) {
      best = cb;
      best_err = err;
    }
  }
  return best;
}

double half_from_bits(std::uint16_t bits) {
  return half_to_double(Eigen::numext::bit_cast<Eigen::half>(bits));
}

double round_to_half(double x) { return half_from_bits(half_bits(x)); }

namespace {

double round_scale(double x, ScaleFormat f) {
  return f == ScaleFormat::Float16 ? round_to_half(x)
                                   : static_cast<double>(static_cast<float>(x));
}

void round_path(QuantPath& p, ScaleFormat f) {
  for (Vector* v : {&p.h, &p.g, &p.ell}) {
    for (Index i = 0; i < v->size(); ++i) (*v)[i] = round_scale((*v)[i], f);
  }
}

std::size_t scale_bytes(ScaleFormat f) { return f == ScaleFormat::Float16 ? 2 : 4; }

std::size_t path_payload_bytes(const QuantPath& p, ScaleFormat f) {
  const auto words = static_cast<std::size_t>((p.d_out() + p.d_in()) * BinaryFactor::words_for(p.rank()));
  const auto scales = static_cast<std::size_t>(p.d_out() + p.d_in() + p.rank());
  return words * 8 + scales * scale_bytes(f);
}

void put_u32(ByteWriter& w, Index v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError(std::string("LBQ1: ") + what + " does not fit u32");
  }
  w.put(static_cast<std::uint32_t>(v));
}

void put_scales(ByteWriter& w, const Vector& v, ScaleFormat f) {
  for (Index i = 0; i < v.size(); ++i) {
    if (f == ScaleFormat::Float16) {
      w.put(half_bits(v[i]));
    } else {
      const auto x = static_cast<float>(v[i]);
      if (!std::isfinite(x)) throw NumericError("LBQ1: scale overflows float32");
      w.put(x);
    }
  }
}

void put_path(ByteWriter& w, const QuantPath& p, ScaleFormat f) {
  for (std::uint64_t word : p.u_sign.words()) w.put(word);
  for (std::uint64_t word : p.v_sign.words()) w.put(word);
  put_scales(w, p.h, f);
  put_scales(w, p.g, f);
  put_scales(w, p.ell, f);
}

BinaryFactor get_factor(ByteReader& r, Index rows, Index cols) {
  std::vector<std::uint64_t> words(static_cast<std::size_t>(rows * BinaryFactor::words_for(cols)));
  for (auto& word : words) word = r.get<std::uint64_t>();
  return BinaryFactor::from_words(rows, cols, std::move(words));
}

Vector get_scales(ByteReader& r, Index n, ScaleFormat f) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = f == ScaleFormat::Float16 ? half_from_bits(r.get<std::uint16_t>())
                                     : static_cast<double>(r.get<float>());
    if (!std::isfinite(v[i])) throw NumericError("LBQ1: non-finite scale");
  }
  return v;
}

QuantPath get_path(ByteReader& r, Index d_out, Index d_in, Index rank, ScaleFormat f) {
  QuantPath p;
  p.u_sign = get_factor(r, d_out, rank);
  p.v_sign = get_factor(r, d_in, rank);
  p.h = get_scales(r, d_out, f);
  p.g = get_scales(r, d_in, f);
  p.ell = get_scales(r, rank, f);
  return p;
}

}  // namespace

LittleBitLayer round_scales(const LittleBitLayer& layer, ScaleFormat format) {
  LittleBitLayer out = layer;
  round_path(out.primary, format);
  if (out.residual) round_path(*out.residual, format);
  return out;
}

std::size_t lbq_payload_bytes(const LittleBitLayer& layer, ScaleFormat format) {
  std::size_t n = path_payload_bytes(layer.primary, format);
  if (layer.residual) n += path_payload_bytes(*layer.residual, format);
  return n;
}

Bytes encode_lbq(const LittleBitLayer& layer, ScaleFormat format) {
  layer.validate();
  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kLbqVersion);
  std::uint16_t flags = 0;
  if (layer.residual) flags |= kFlagResidual;
  if (format == ScaleFormat::Float16) flags |= kFlagFp16;
  w.put(flags);
  put_u32(w, layer.d_out, "d_out");
  put_u32(w, layer.d_in, "d_in");
  put_u32(w, layer.primary.rank(), "r_primary");
  put_u32(w, layer.residual ? layer.residual->rank() : 0, "r_residual");
  put_path(w, layer.primary, format);
  if (layer.residual) put_path(w, *layer.residual, format);
  return w.take();
}

LoadedLayer decode_lbq(const Bytes& data) {
  ByteReader r(data, "LBQ1");
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError("LBQ1: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kLbqVersion) {
    throw VersionError("LBQ1: unsupported version " + std::to_string(version));
  }
  const auto flags = r.get<std::uint16_t>();
  if (flags & ~(kFlagResidual | kFlagFp16)) {
    throw InconsistentError("LBQ1: unknown flag bits " + std::to_string(flags));
  }
  const Index d_out = r.get<std::uint32_t>();
  const Index d_in = r.get<std::uint32_t>();
  const Index r_pri = r.get<std::uint32_t>();
  const Index r_res = r.get<std::uint32_t>();
  const bool has_res = (flags & kFlagResidual) != 0;
  if (!has_res && r_res != 0) {
    throw InconsistentError("LBQ1: r_residual set without the residual flag");
  }
  LoadedLayer out;
  out.format = (flags & kFlagFp16) ? ScaleFormat::Float16 : ScaleFormat::Float32;
  out.layer.d_out = d_out;
  out.layer.d_in = d_in;

  const auto expected_path = [&](Index rank) {
    const std::uint64_t words = std::uint64_t(d_out + d_in) * std::uint64_t(BinaryFactor::words_for(rank));
    const std::uint64_t scales = std::uint64_t(d_out + d_in + rank);
    return words * 8 + scales * scale_bytes(out.format);
  };
  const std::uint64_t expected = expected_path(r_pri) + (has_res ? expected_path(r_res) : 0);
  if (r.remaining() < expected) {
    throw TruncatedError("LBQ1: payload holds " + std::to_string(r.remaining()) +
                         " bytes, header promises " + std::to_string(expected));
  }

  out.layer.primary = get_path(r, d_out, d_in, r_pri, out.format);
  if (has_res) out.layer.residual = get_path(r, d_out, d_in, r_res, out.format);
  if (r.remaining() != 0) {
    throw InconsistentError("LBQ1: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return out;
}

void save_lbq(const LittleBitLayer& layer, const std::filesystem::path& path, ScaleFormat format) {
  write_file_atomic(path, encode_lbq(layer, format));
}

LoadedLayer load_lbq_with_format(const std::filesystem::path& path) {
  return decode_lbq(read_file(path));
}

LittleBitLayer load_lbq(const std::filesystem::path& path) {
  return load_lbq_with_format(path).layer;
}

}  // namespace littlebit
