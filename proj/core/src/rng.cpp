#include "qdistill/rng.hpp"

#include <array>

namespace qdistill {

Engine frame_engine(std::uint64_t seed, std::uint64_t frame_index, std::uint32_t stream) {
  std::array<std::uint32_t, 6> key{
      static_cast<std::uint32_t>(seed),        static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(frame_index), static_cast<std::uint32_t>(frame_index >> 32),
      stream,                                  0x51d7u};
  std::seed_seq seq(key.begin(), key.end());
  return Engine(seq);
}

}  // namespace qdistill
