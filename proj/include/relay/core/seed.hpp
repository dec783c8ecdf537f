#pragma once

#include <cstdint>
#include <string_view>

namespace relay {

// Deterministic, platform-stable hashing used to derive per-task and
// per-request seeds. std::hash is not stable across standard libraries, so
// seeds never go through it.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::string_view tag) noexcept {
  return mix_seed(a, fnv1a(tag));
}

/// Per-orchestrator seed: hash(run_seed, task_id). Independent of the order in
/// which tasks are scheduled.
constexpr std::uint64_t task_seed(std::uint64_t run_seed, std::string_view task_id) noexcept {
  return mix_seed(run_seed, task_id);
}

/// Uniform integer in [0, n) from a 64-bit draw (multiply-shift reduction).
inline std::uint64_t bounded(std::uint64_t draw, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
}

/// Uniform double in [0, 1) from the top 53 bits of a draw.
constexpr double unit_interval(std::uint64_t draw) noexcept {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

}  // namespace relay
