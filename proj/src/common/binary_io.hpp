// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "common/error.hpp"

namespace mgc::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; add byte swapping for BE hosts");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, std::string_view what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<std::size_t>(is.gcount()) == sizeof(T), ErrorKind::Parse,
          "truncated " + std::string(what));
  return v;
}

inline void write_f32(std::ostream& os, std::span<const float> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size_bytes()));
}

inline void read_f32(std::istream& is, std::span<float> v, std::string_view what) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size_bytes()));
  require(static_cast<std::size_t>(is.gcount()) == v.size_bytes(),
          ErrorKind::Parse, "truncated " + std::string(what));
}

}  // namespace mgc::binio
