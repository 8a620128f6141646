#pragma once

#include <cstdint>
#include <random>

namespace reflev {

using Rng = std::mt19937_64;

/// Purpose tags for independent streams belonging to one replica.
enum class Stream : std::uint32_t {
    kJumps = 0,     // barrier phase, Poisson epochs, jump sizes
    kDiffusion = 1, // Gaussian increments of the grid scheme
    kAuxiliary = 2, // test / validation draws
};

/// Deterministic stream for (seed, replica, purpose). Independent of scheduling,
/// so replicas can run on any worker in any order.
inline Rng make_stream(std::uint64_t seed, std::uint64_t replica, Stream purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
                      static_cast<std::uint32_t>(purpose), 0x9e3779b9u};
    return Rng(seq);
}

}  // namespace reflev
