#pragma once

#include <cstdint>
#include <random>

namespace qdistill {

using Engine = std::mt19937_64;

/// Independent random substreams keyed by (seed, frame index, stream id).
///
/// Any frame can be regenerated in isolation, so frame generation order and
/// thread count never change the output.
Engine frame_engine(std::uint64_t seed, std::uint64_t frame_index, std::uint32_t stream = 0);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit_draw(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace qdistill
