#pragma once

#include <cstdint>
#include <random>

namespace modad {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream id (splitmix64) so that stages draw from
/// unrelated generators while staying a pure function of the run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace modad
