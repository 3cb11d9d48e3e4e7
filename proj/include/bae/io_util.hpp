#pragma once

#include "bae/common.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace bae::io {

static_assert(sizeof(float) == 4, "f32 payloads assume IEEE-754 single precision");

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError(std::string("truncated payload while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void write_f32_block(std::ostream& out, const float* data, std::size_t count);
void read_f32_block(std::istream& in, float* data, std::size_t count, const char* what);

/// Writes through a sibling temp file and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                  bool binary = false);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

/// "%.9g"-style formatting used by every CSV writer so reruns are byte-identical.
std::string fmt(double value);

}  // namespace bae::io
