#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace coforge {

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

/// Fans a root seed out into labeled, decorrelated sub-seeds.
inline uint64_t sub_seed(uint64_t root, std::string_view label) {
  uint64_t h = fnv1a64(label);
  h = fnv1a64(&root, sizeof(root), h);
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

}  // namespace coforge
