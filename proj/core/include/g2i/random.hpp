#pragma once

#include <cstdint>
#include <random>

namespace g2i {

using Engine = std::mt19937_64;

/// Independent RNG substreams. Every stochastic stage draws from its own
/// engine, seeded from (master seed, stream tag, index) through
/// std::seed_seq, so results do not depend on which thread processes which
/// pixel or in which order.
enum class Stream : std::uint32_t {
  modes = 1,      // index = polarization branch
  arrivals = 2,   // index = pixel
  jitter = 3,     // index = pixel
  incoherent = 4, // index = pixel
};

Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index);

} // namespace g2i
