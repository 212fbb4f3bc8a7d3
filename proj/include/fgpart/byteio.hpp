#pragma once

// Little-endian primitive encoding shared by the PFV1 and PFVM containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace fgpart::byteio {

template <class T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

/// Returns false on short read.
template <class T>
  requires std::is_arithmetic_v<T>
bool get(std::istream& in, T& value) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, buf, sizeof(T));
  return true;
}

inline void put_floats(std::ostream& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put(out, data[i]);
  }
}

inline bool get_floats(std::istream& in, float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(n * sizeof(float));
    in.read(reinterpret_cast<char*>(data), bytes);
    return in.gcount() == bytes;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (!get(in, data[i])) return false;
    return true;
  }
}

inline void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline bool get_string(std::istream& in, std::string& s, std::uint32_t max_len) {
  std::uint32_t n = 0;
  if (!get(in, n) || n > max_len) return false;
  s.resize(n);
  in.read(s.data(), n);
  return in.gcount() == static_cast<std::streamsize>(n);
}

}  // namespace fgpart::byteio
