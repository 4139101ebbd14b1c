#include "g2i/random.hpp"

namespace g2i {

Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                         static_cast<std::uint32_t>(index >> 32)};
  return Engine(sequence);
}

} // namespace g2i
