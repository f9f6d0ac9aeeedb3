#pragma once

// Reproducible random streams. Every random draw in the library comes from a
// stream derived from (master seed, domain, index[, sub-index]); no generator
// is ever shared between permutations, so results do not depend on thread
// count or evaluation order.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rapidmaxnull {

enum class StreamDomain : std::uint64_t {
  kShuffle = 1,
  kTrainingSample = 2,
  kRecoverySample = 3,
  kResidualNoise = 4,
  kShiftNoise = 5,
  kBasisInit = 6,
  kSimulation = 7,
  kCellSeed = 8,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                                    std::uint64_t index,
                                    std::uint64_t sub = 0) noexcept {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(domain));
  h = mix64(h ^ index);
  return mix64(h ^ (sub * 0xd1342543de82ef95ULL));
}

// std::mt19937_64's output sequence is fixed by the standard, so a derived
// stream is bit-identical on every conforming platform.
using Stream = std::mt19937_64;

inline Stream make_stream(std::uint64_t master, StreamDomain domain,
                          std::uint64_t index, std::uint64_t sub = 0) {
  return Stream(derive_seed(master, domain, index, sub));
}

/// Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> shuffle_indices(std::size_t n, Stream& rng);

/// k distinct indices from 0..n-1, sorted ascending (Floyd's algorithm).
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k,
                                                    Stream& rng);

/// Fills `out` with i.i.d. N(0, sigma^2) draws.
void fill_normal(std::span<double> out, double sigma, Stream& rng);

}  // namespace rapidmaxnull
