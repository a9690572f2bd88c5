#pragma once

// Little-endian helpers shared by the checkpoint and dataset containers.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "hsva/errors.hpp"

namespace hsva::binary {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void append(std::string& buf, T v) {
  v = to_little(v);
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void append_array(std::string& buf, const T* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    buf.append(reinterpret_cast<const char*>(data), n * sizeof(T));
  } else {
    for (std::size_t i = 0; i < n; ++i) append(buf, data[i]);
  }
}

/// Reads a little-endian T at `offset`, advancing it; throws DataError naming
/// `what` if the buffer is too short.
template <typename T>
T read(const std::string& buf, std::size_t& offset, const std::string& what) {
  if (offset + sizeof(T) > buf.size()) throw DataError(what + ": truncated");
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  offset += sizeof(T);
  return to_little(v);
}

template <typename T>
void read_array(const std::string& buf, std::size_t& offset, T* out, std::size_t n, const std::string& what) {
  if (n > (buf.size() - std::min(offset, buf.size())) / sizeof(T)) throw DataError(what + ": truncated");
  std::memcpy(out, buf.data() + offset, n * sizeof(T));
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) out[i] = to_little(out[i]);
  }
  offset += n * sizeof(T);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace hsva::binary
