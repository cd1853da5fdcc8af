#pragma once

// Portable seeded randomness. std::mt19937_64 output is fixed by the
// standard; the draws below avoid the implementation-defined std
// distributions wherever bitwise reproducibility across toolchains matters.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fieldrecon {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 14695981039346656037ULL) noexcept;

/// Deterministic child seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(Rng& rng) noexcept;

/// Uniform double in [lo, hi).
double uniform(Rng& rng, double lo, double hi) noexcept;

/// Uniform integer in [0, n) by rejection; n > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) noexcept;

/// Standard normal via Box-Muller.
double standard_normal(Rng& rng) noexcept;

/// In-place Fisher-Yates shuffle using uniform_index.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace fieldrecon
