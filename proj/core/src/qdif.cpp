#include "qdistill/qdif.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include "qdistill/error.hpp"
#include "qdistill/le.hpp"

namespace qdistill {

void Fnv1a::update(std::span<const unsigned char> bytes) {
  for (unsigned char b : bytes) {
    h_ ^= b;
    h_ *= 0x100000001b3ull;
  }
}

std::vector<unsigned char> encode_qdif_header(const StackInfo& info) {
  std::vector<unsigned char> h;
  h.reserve(kQdifHeaderBytes);
  h.insert(h.end(), {'Q', 'D', 'I', 'F'});
  h.push_back(kQdifVersion);
  le::put_u32(h, static_cast<std::uint32_t>(info.grid.width));
  le::put_u32(h, static_cast<std::uint32_t>(info.grid.height));
  le::put_u64(h, info.n_frames);
  le::put_u32(h, std::bit_cast<std::uint32_t>(info.exposure_ms));
  h.resize(kQdifHeaderBytes, 0);
  return h;
}

StackInfo decode_qdif_header(std::span<const unsigned char> h) {
  if (h.size() < kQdifHeaderBytes) throw DataError("QDIF header is truncated");
  if (std::memcmp(h.data(), "QDIF", 4) != 0) throw DataError("not a QDIF file (bad magic)");
  if (h[4] != kQdifVersion) throw DataError("unsupported QDIF version " + std::to_string(h[4]));
  StackInfo info;
  const std::uint32_t w = le::get_u32(h.subspan(5));
  const std::uint32_t ht = le::get_u32(h.subspan(9));
  if (w == 0 || ht == 0 || w > 65536 || ht > 65536) throw DataError("QDIF header has an invalid frame size");
  info.grid = Grid{static_cast<int>(w), static_cast<int>(ht)};
  info.n_frames = le::get_u64(h.subspan(13));
  info.exposure_ms = std::bit_cast<float>(le::get_u32(h.subspan(21)));
  return info;
}

// ------------------------------------------------------------------ writer

QdifWriter::QdifWriter(const std::string& path, Grid grid, float exposure_ms)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), info_{grid, 0, exposure_ms} {
  if (!grid.valid()) throw ConfigError("QDIF writer needs a non-empty grid");
  if (!out_) throw DataError("cannot open " + path + " for writing");
  const auto header = encode_qdif_header(info_);
  out_.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  if (!out_) throw DataError("write failed on " + path);
  buffer_.reserve(grid.size() * 2);
}

QdifWriter::~QdifWriter() {
  try {
    close();
  } catch (...) {
  }
}

void QdifWriter::write(std::span<const std::uint16_t> frame) {
  if (closed_) throw DataError("QDIF writer is closed");
  if (frame.size() != info_.grid.size()) throw CorruptStackError("frame size does not match stack geometry", frames_);
  buffer_.clear();
  for (std::uint16_t v : frame) le::put_u16(buffer_, v);
  hash_.update(buffer_);
  out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw DataError("write failed on " + path_ + " at frame " + std::to_string(frames_));
  ++frames_;
}

void QdifWriter::close() {
  if (closed_) return;
  closed_ = true;
  info_.n_frames = frames_;
  const auto header = encode_qdif_header(info_);
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out_.flush();
  if (!out_) throw DataError("write failed on " + path_);
  out_.close();
}

// ------------------------------------------------------------------ reader

QdifReader::QdifReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open " + path);
  std::vector<unsigned char> header(kQdifHeaderBytes);
  in_.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  if (in_.gcount() != static_cast<std::streamsize>(kQdifHeaderBytes)) throw DataError(path + ": QDIF header is truncated");
  info_ = decode_qdif_header(header);
  const std::uint64_t frame_bytes = info_.grid.size() * 2;
  const std::uint64_t payload = std::filesystem::file_size(path) - kQdifHeaderBytes;
  if (payload > info_.n_frames * frame_bytes) {
    throw DataError(path + ": payload is longer than the declared " + std::to_string(info_.n_frames) + " frames");
  }
  available_frames_ = payload / frame_bytes;
  buffer_.resize(frame_bytes);
}

bool QdifReader::next(std::span<std::uint16_t> out) {
  if (frames_ >= info_.n_frames) return false;
  if (out.size() != info_.grid.size()) throw ConfigError("frame buffer has the wrong size");
  if (frames_ >= available_frames_) {
    throw CorruptStackError(path_ + ": stack is truncated", frames_);
  }
  in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (in_.gcount() != static_cast<std::streamsize>(buffer_.size())) {
    throw CorruptStackError(path_ + ": read failed", frames_);
  }
  hash_.update(buffer_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = le::get_u16(std::span<const unsigned char>(buffer_).subspan(2 * i));
  ++frames_;
  return true;
}

FrameStack read_qdif(const std::string& path) {
  QdifReader reader(path);
  FrameStack stack;
  stack.info = reader.info();
  const std::size_t P = stack.info.grid.size();
  stack.data.resize(P * stack.info.n_frames);
  for (std::uint64_t l = 0; l < stack.info.n_frames; ++l) {
    reader.next(std::span<std::uint16_t>(stack.data).subspan(l * P, P));
  }
  return stack;
}

void write_qdif(const std::string& path, const FrameStack& stack) {
  QdifWriter writer(path, stack.info.grid, stack.info.exposure_ms);
  for (std::uint64_t l = 0; l < stack.info.n_frames; ++l) writer.write(stack.frame(l));
  writer.close();
}

std::uint64_t pump_qdif(QdifReader& reader, FrameSink& sink) {
  std::vector<std::uint16_t> frame(reader.info().grid.size());
  while (reader.next(frame)) sink.write(frame);
  return reader.payload_hash();
}

}  // namespace qdistill
