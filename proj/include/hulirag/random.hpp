#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hulirag {

// std::mt19937_64 output is fixed by the standard; the distributions are not,
// so index sampling goes through uniform_index to keep results identical
// across standard libraries.
using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection sampling. n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform real in [0, 1) built from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Child seed for a named consumer: splitmix64(root ^ fnv1a(name)).
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace hulirag
