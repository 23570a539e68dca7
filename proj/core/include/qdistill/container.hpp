#pragma once

// QDCR correlation container, little-endian:
//
//   offset  size  field
//   0       4     magic "QDCR"
//   4       1     format version (1)
//   5       3     reserved, zero
//   8       4     width (u32)
//   12      4     height (u32)
//   16      4     window radius w (u32)
//   20      4     reserved, zero
//   24      8     n_frames (u64)
//   32      8     source hash (u64, FNV-1a of the QDIF payload)
//   40      ...   mean[P], diagonal[P], gamma[(2w+1)^2 * P]   (f64 each)
//
// gamma is ordered offset-major: offsets (dx, dy) row-major over dy then dx,
// each holding one full image.

#include <string>

#include "qdistill/correlator.hpp"

namespace qdistill {

inline constexpr std::size_t kQdcrHeaderBytes = 40;

void write_correlation(const std::string& path, const CorrelationResult& result);
CorrelationResult read_correlation(const std::string& path);

}  // namespace qdistill
