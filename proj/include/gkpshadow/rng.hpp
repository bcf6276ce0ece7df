#pragma once
// Reproducible random streams keyed by (master seed, shard, stream tag).
// Each key is expanded through std::seed_seq into an independent mt19937_64
// state; draws within a stream are consumed in a fixed order, so the draw
// index is the stream position.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace gkps {

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t shard, std::uint64_t tag = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(shard), static_cast<std::uint32_t>(shard >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                      0x6b5fca6bU};
    return Rng(seq);
}

inline std::string seed_path(std::uint64_t seed, std::uint64_t shard, std::uint64_t draw) {
    std::ostringstream os;
    os << seed << "/" << shard << "/" << draw;
    return os.str();
}

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Uniform on (0, 1].
inline double uniform_open0(Rng& rng) { return 1.0 - uniform01(rng); }

inline double normal01(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Contiguous block [begin, end) of `total` draws assigned to shard s of k.
inline std::pair<std::uint64_t, std::uint64_t> shard_range(std::uint64_t total, std::uint64_t k,
                                                           std::uint64_t s) {
    const std::uint64_t base = total / k, extra = total % k;
    const std::uint64_t begin = s * base + std::min(s, extra);
    return {begin, begin + base + (s < extra ? 1 : 0)};
}

}  // namespace gkps
