#pragma once

#include <cstdint>
#include <random>

namespace corrloc {

using Engine = std::mt19937_64;

/// Independent stream tags. A trial never draws two purposes from one stream.
enum class Stream : std::uint64_t {
  field = 1,
  decoration = 2,
  oracle = 3,
  solver_start = 4,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-trial seed: a fixed function of (master seed, trial index, stream).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    Stream stream = Stream::field) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ (index * 0xD1B54A32D192ED03ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(stream) * 0xA24BAED4963EE407ULL));
  return h;
}

}  // namespace corrloc
