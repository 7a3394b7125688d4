#pragma once

// Counter-based random streams.
//
// All sampling in the library goes through Philox4x32-10 (Salmon et al.,
// Random123). A draw is a pure function of (key, stream, index), so any
// element of any tuple can be produced independently and in any order, and
// generators are plain values that can be copied between threads.

#include <array>
#include <cstdint>
#include <string_view>

namespace sayo {

using Philox4x32 = std::array<std::uint32_t, 4>;

constexpr Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

// SplitMix64 finalizer, used only to derive keys from structured seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t hash_id(std::string_view id) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Per-asset key: independent of the order in which assets enter a session.
constexpr std::uint64_t derive_seed(std::uint64_t session_seed, std::string_view asset_id) {
  return mix64(session_seed ^ mix64(hash_id(asset_id)));
}

class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t key, std::uint64_t stream = 0) : key_(key), stream_(stream) {}

  constexpr Philox4x32 block(std::uint64_t index) const {
    return philox4x32_10({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                         {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
  }

  // Uniform on the open interval (0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t index) const {
    const Philox4x32 r = block(index);
    const std::uint64_t bits = (std::uint64_t{r[0]} << 21) ^ (std::uint64_t{r[1]} >> 11);
    return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
  }

  constexpr std::uint64_t bits64(std::uint64_t index) const {
    const Philox4x32 r = block(index);
    return (std::uint64_t{r[0]} << 32) | r[1];
  }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
};

}  // namespace sayo
