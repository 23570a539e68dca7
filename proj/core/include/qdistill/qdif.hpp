#pragma once

// QDIF frame-stack file, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "QDIF"
//   4       1     format version (1)
//   5       4     width   (u32)
//   9       4     height  (u32)
//   13      8     n_frames (u64)
//   21      4     exposure_ms (f32, IEEE-754)
//   25      11    reserved, zero
//   36      ...   frames in order, row-major, u16 per pixel
//
// Payload length is exactly width * height * n_frames * 2 bytes.

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "qdistill/camera.hpp"

namespace qdistill {

inline constexpr std::size_t kQdifHeaderBytes = 36;
inline constexpr std::uint8_t kQdifVersion = 1;

/// 64-bit FNV-1a, fed incrementally.
class Fnv1a {
 public:
  void update(std::span<const unsigned char> bytes);
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

std::vector<unsigned char> encode_qdif_header(const StackInfo& info);
StackInfo decode_qdif_header(std::span<const unsigned char> header);

/// Streams frames to a QDIF file. The header's frame count is rewritten on
/// close() to the number of frames actually written.
class QdifWriter : public FrameSink {
 public:
  QdifWriter(const std::string& path, Grid grid, float exposure_ms);
  ~QdifWriter() override;

  void write(std::span<const std::uint16_t> frame) override;
  void close();

  std::uint64_t frames_written() const { return frames_; }
  std::uint64_t payload_hash() const { return hash_.value(); }

 private:
  std::string path_;
  std::ofstream out_;
  StackInfo info_;
  std::uint64_t frames_ = 0;
  Fnv1a hash_;
  std::vector<unsigned char> buffer_;
  bool closed_ = false;
};

/// Sequential QDIF reader; validates magic, version and payload size.
class QdifReader {
 public:
  explicit QdifReader(const std::string& path);

  const StackInfo& info() const { return info_; }

  /// Reads the next frame into `out`. Returns false after the last frame;
  /// throws CorruptStackError naming the frame when the payload is short.
  bool next(std::span<std::uint16_t> out);

  std::uint64_t frames_read() const { return frames_; }
  std::uint64_t payload_hash() const { return hash_.value(); }

 private:
  std::string path_;
  std::ifstream in_;
  StackInfo info_;
  std::uint64_t frames_ = 0;
  std::uint64_t available_frames_ = 0;
  Fnv1a hash_;
  std::vector<unsigned char> buffer_;
};

FrameStack read_qdif(const std::string& path);
void write_qdif(const std::string& path, const FrameStack& stack);

/// Streams a QDIF file into a sink. Returns the payload hash.
std::uint64_t pump_qdif(QdifReader& reader, FrameSink& sink);

}  // namespace qdistill
