// SPDX-License-Identifier: Apache-2.0
#include "littlebit/file_util.hpp"

#include <fstream>
#include <iterator>
#include <random>
#include <system_error>

namespace littlebit {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace {

void write_atomic_raw(const fs::path& path, const char* data, std::size_t size) {
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view contents) {
  write_atomic_raw(path, contents.data(), contents.size());
}

void write_file_atomic(const fs::path& path, const Bytes& contents) {
  write_atomic_raw(path, reinterpret_cast<const char*>(contents.data()), contents.size());
}

}  // namespace littlebit
