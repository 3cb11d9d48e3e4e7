#include "bae/io_util.hpp"

#include <cstdio>
#include <fstream>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace bae {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::ordered: return "ordered";
    case Variant::mixed: return "mixed";
    case Variant::combined: return "combined";
    case Variant::topk: return "topk";
  }
  throw VariantError("unknown variant tag " + std::to_string(static_cast<int>(v)));
}

Variant parse_variant(const std::string& name) {
  if (name == "vanilla") return Variant::vanilla;
  if (name == "ordered") return Variant::ordered;
  if (name == "mixed") return Variant::mixed;
  if (name == "combined") return Variant::combined;
  if (name == "topk") return Variant::topk;
  throw VariantError("unknown variant '" + name + "'");
}

namespace io {

void write_f32_block(std::ostream& out, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) write_le(out, data[i]);
  }
}

void read_f32_block(std::istream& in, float* data, std::size_t count, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(count * sizeof(float));
    if (!in.read(reinterpret_cast<char*>(data), bytes) || in.gcount() != bytes) {
      throw FormatError(std::string("truncated payload while reading ") + what);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = read_le<float>(in, what);
  }
}

void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                  bool binary) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, [&](std::ostream& out) { out << text; });
}

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace io
}  // namespace bae
