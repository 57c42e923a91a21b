#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "dialign/error.hpp"

namespace dialign {

// FNV-1a 64-bit. Used to fingerprint inputs in run manifests; not a
// cryptographic hash.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t state = 0xCBF29CE484222325ULL) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001B3ULL;
  }
  return state;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t state = 0xCBF29CE484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    state = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), state);
    if (!in) break;
  }
  return hex64(state);
}

}  // namespace dialign
