#pragma once

#include <cstdint>
#include <random>

namespace synergy {

// Seeded RNG with platform-independent derived draws. mt19937_64 itself is
// fully specified by the standard; the distributions in <random> are not,
// so bounded()/uniform01() implement their own reductions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n > 0. Lemire multiply-shift reduction.
    std::uint64_t bounded(std::uint64_t n) {
        const unsigned __int128 wide =
            static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // Uniform double in [0, 1) with 53 significant bits.
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 engine_;
};

// 64-bit FNV-1a. Used for dedup keys and trace fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= static_cast<std::uint64_t>(bytes[i]);
        hash *= 0x00000100000001b3ull;
    }
    return hash;
}

} // namespace synergy
