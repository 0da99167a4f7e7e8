#pragma once

#include <cstdint>
#include <random>

namespace awseg {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for item `index` of an independent random stream. Streams separate
/// unrelated consumers (scene generation, augmentation, sampling, init).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix_seed(seed ^ mix_seed(stream)) ^ index;
}

enum Stream : std::uint64_t {
  kStreamSource = 1,
  kStreamTargetLabeled,
  kStreamTargetUnlabeled,
  kStreamTestAdverse,
  kStreamTestSource,
  kStreamAugment,
  kStreamPseudoVal,
  kStreamInit,
  kStreamHeadExtension,
  kStreamShuffle,
  kStreamSslSampling,
  kStreamMixSampling,
  kStreamTriplet,
};

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace awseg
