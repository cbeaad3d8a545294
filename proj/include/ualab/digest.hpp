#pragma once

#include <cstdint>
#include <string>

namespace ualab {

// FNV-1a over the canonical JSON of a config. Not cryptographic; used only to
// key artifacts so that equal digests imply equal provenance.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[x & 0xf];
    x >>= 4;
  }
  return out;
}

inline std::string digest_string(std::string_view s) {
  return hex64(fnv1a64(s));
}

}  // namespace ualab
