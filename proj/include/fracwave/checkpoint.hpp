#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "fracwave/grid.hpp"

namespace fracwave {

/// Binary Field checkpoint.
///
/// Layout (all little-endian):
///   bytes  0..7   magic "FWFIELD\0"
///   bytes  8..11  uint32 version (currently 1)
///   bytes 12..15  uint32 reserved, zero
///   bytes 16..23  float64 L
///   bytes 24..31  uint64 n
///   bytes 32..    n float64 samples, node i at x = -L/2 + i L/n
namespace checkpoint {

inline constexpr std::array<char, 8> magic{'F', 'W', 'F', 'I', 'E', 'L', 'D', '\0'};
inline constexpr std::uint32_t version = 1;

namespace detail {
template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}
template <class T>
void put(std::ostream& os, T v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return to_le(v);
}
}  // namespace detail

inline void write(const Field& f, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write", path.string());
  os.write(magic.data(), magic.size());
  detail::put<std::uint32_t>(os, version);
  detail::put<std::uint32_t>(os, 0);
  detail::put<double>(os, f.grid().length());
  detail::put<std::uint64_t>(os, f.size());
  for (double v : f.values()) detail::put<double>(os, v);
  if (!os) throw Error(ErrorKind::io, "cannot write", path.string());
}

inline Field read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read", path.string());
  std::array<char, 8> m{};
  is.read(m.data(), m.size());
  if (!is || m != magic) throw Error(ErrorKind::io, "bad checkpoint", path.string() + ": wrong magic");
  const auto ver = detail::get<std::uint32_t>(is);
  if (ver != version) throw Error(ErrorKind::io, "bad checkpoint", path.string() + ": unsupported version");
  (void)detail::get<std::uint32_t>(is);
  const double L = detail::get<double>(is);
  const auto n = detail::get<std::uint64_t>(is);
  if (!is) throw Error(ErrorKind::io, "bad checkpoint", path.string() + ": truncated header");
  const Grid g(L, static_cast<std::size_t>(n));
  std::vector<double> v(n);
  for (auto& a : v) a = detail::get<double>(is);
  if (!is) throw Error(ErrorKind::io, "bad checkpoint", path.string() + ": truncated data");
  return Field(g, std::move(v));
}

}  // namespace checkpoint
}  // namespace fracwave
