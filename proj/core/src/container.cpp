#include "qdistill/container.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "qdistill/error.hpp"
#include "qdistill/le.hpp"

namespace qdistill {

namespace {

constexpr std::uint8_t kVersion = 1;

void put_doubles(std::vector<unsigned char>& out, std::span<const double> values) {
  for (double v : values) le::put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void get_doubles(std::span<const unsigned char> in, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(le::get_u64(in.subspan(8 * i)));
}

}  // namespace

void write_correlation(const std::string& path, const CorrelationResult& r) {
  const std::size_t P = r.grid.size();
  const std::size_t side = static_cast<std::size_t>(r.window_side());
  if (r.mean.size() != P || r.diagonal.size() != P || r.gamma.size() != side * side * P) {
    throw ConfigError("correlation result is inconsistent with its grid");
  }
  std::vector<unsigned char> buf;
  buf.reserve(kQdcrHeaderBytes + 8 * (2 + side * side) * P);
  buf.insert(buf.end(), {'Q', 'D', 'C', 'R', kVersion, 0, 0, 0});
  le::put_u32(buf, static_cast<std::uint32_t>(r.grid.width));
  le::put_u32(buf, static_cast<std::uint32_t>(r.grid.height));
  le::put_u32(buf, static_cast<std::uint32_t>(r.window_radius));
  le::put_u32(buf, 0);
  le::put_u64(buf, r.n_frames);
  le::put_u64(buf, r.source_hash);
  put_doubles(buf, r.mean.pixels());
  put_doubles(buf, r.diagonal.pixels());
  put_doubles(buf, r.gamma);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed on " + path);
}

CorrelationResult read_correlation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<unsigned char> buf(std::filesystem::file_size(path));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw DataError("read failed on " + path);
  if (buf.size() < kQdcrHeaderBytes) throw DataError(path + ": correlation header is truncated");
  if (std::memcmp(buf.data(), "QDCR", 4) != 0) throw DataError(path + ": not a correlation container (bad magic)");
  if (buf[4] != kVersion) throw DataError(path + ": unsupported container version " + std::to_string(buf[4]));

  const std::span<const unsigned char> b(buf);
  CorrelationResult r;
  const std::uint32_t w = le::get_u32(b.subspan(8));
  const std::uint32_t h = le::get_u32(b.subspan(12));
  const std::uint32_t radius = le::get_u32(b.subspan(16));
  if (w == 0 || h == 0 || w > 65536 || h > 65536 || radius > 1024) {
    throw DataError(path + ": container header has invalid dimensions");
  }
  r.grid = Grid{static_cast<int>(w), static_cast<int>(h)};
  r.window_radius = static_cast<int>(radius);
  r.n_frames = le::get_u64(b.subspan(24));
  r.source_hash = le::get_u64(b.subspan(32));

  const std::size_t P = r.grid.size();
  const std::size_t side = static_cast<std::size_t>(r.window_side());
  const std::size_t expected = kQdcrHeaderBytes + 8 * (2 + side * side) * P;
  if (buf.size() != expected) {
    throw DataError(path + ": container payload is " + std::to_string(buf.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  r.mean = ImageD(r.grid);
  r.diagonal = ImageD(r.grid);
  r.gamma.resize(side * side * P);
  std::size_t at = kQdcrHeaderBytes;
  get_doubles(b.subspan(at, 8 * P), r.mean.pixels());
  at += 8 * P;
  get_doubles(b.subspan(at, 8 * P), r.diagonal.pixels());
  at += 8 * P;
  get_doubles(b.subspan(at), r.gamma);
  return r;
}

}  // namespace qdistill
