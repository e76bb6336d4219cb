#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bxent {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a. Stable across platforms and runs; used for case ids,
/// prompt hashes and dataset fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// Incremental FNV-1a with field separation, so ("ab","c") != ("a","bc").
class StableHasher {
 public:
  StableHasher& add(std::string_view field) {
    state_ = fnv1a64(field, state_);
    state_ = fnv1a64(std::string_view("\x1f", 1), state_);
    return *this;
  }
  StableHasher& add(std::uint64_t value);
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = kFnvOffset;
};

std::string to_hex64(std::uint64_t value);
std::uint64_t from_hex64(std::string_view text);

}  // namespace bxent
