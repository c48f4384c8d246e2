#pragma once

#include <cstdint>

namespace modescope {

/// splitmix64 finalizer; decorrelates nearby integer inputs.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic per-point sub-seed so grid points can be evaluated in any
/// order (or in parallel) with identical results.
inline std::uint64_t derive_subseed(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t stream = 0) {
    return mix64(mix64(seed) ^ mix64(index * 2 + 1) ^ (stream * 0xd1342543de82ef95ull));
}

}  // namespace modescope
