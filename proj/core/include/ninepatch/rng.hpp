#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace ninepatch {

/// Seeded pseudo-random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The uniform/normal conversions are done here rather than through
/// <random> distributions, whose algorithms are implementation-defined, so a
/// seed reproduces the same stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal deviate (Box-Muller, no caching).
    double normal();

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent seed for a named consumer ("init", "shuffle", ...)
/// from a top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace ninepatch
