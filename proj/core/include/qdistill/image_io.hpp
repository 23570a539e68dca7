#pragma once

#include <cstdint>
#include <string>

#include "qdistill/image.hpp"

namespace qdistill {

struct PgmImage {
  GrayFrame pixels;
  std::uint16_t maxval = 255;
};

/// Reads binary (P5) or plain (P2) PGM, 8 or 16 bits per sample.
PgmImage read_pgm(const std::string& path);

/// Samples scaled to [0, 1] by maxval.
ImageD read_pgm_unit(const std::string& path);

/// Writes binary PGM; 8-bit samples when maxval < 256, else 16-bit big-endian.
void write_pgm(const std::string& path, const GrayFrame& image, std::uint16_t maxval = 65535);

/// Linear map of [0, max] onto [0, 65535]; negative values clip to 0.
void write_pgm_scaled(const std::string& path, const ImageD& image);

/// One image row per line, values printed with 17 significant digits.
void write_csv(const std::string& path, const ImageD& image);
ImageD read_csv(const std::string& path);

}  // namespace qdistill
