#include "qdistill/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "qdistill/error.hpp"

namespace qdistill {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens of a PGM, skipping '#' comments.
class PgmCursor {
 public:
  PgmCursor(const std::vector<unsigned char>& bytes, const std::string& path) : b_(bytes), path_(path) {}

  std::string token() {
    skip_space();
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) t.push_back(static_cast<char>(b_[pos_++]));
    if (t.empty()) throw DataError(path_ + ": PGM header is truncated");
    return t;
  }

  unsigned long number() {
    const std::string t = token();
    unsigned long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw DataError(path_ + ": bad PGM number '" + t + "'");
    return v;
  }

  // After maxval exactly one whitespace byte precedes the raster.
  void skip_one() { ++pos_; }
  std::size_t pos() const { return pos_; }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& b_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

PgmImage read_pgm(const std::string& path) {
  const auto bytes = slurp(path);
  PgmCursor cur(bytes, path);
  const std::string magic = cur.token();
  if (magic != "P5" && magic != "P2") throw DataError(path + ": not a PGM file");
  const unsigned long w = cur.number();
  const unsigned long h = cur.number();
  const unsigned long maxval = cur.number();
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw DataError(path + ": PGM has invalid dimensions");
  if (maxval == 0 || maxval > 65535) throw DataError(path + ": PGM maxval out of range");

  PgmImage img;
  img.maxval = static_cast<std::uint16_t>(maxval);
  img.pixels = GrayFrame(Grid{static_cast<int>(w), static_cast<int>(h)});
  const std::size_t n = img.pixels.size();
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned long v = cur.number();
      if (v > maxval) throw DataError(path + ": PGM sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
    return img;
  }
  cur.skip_one();
  const std::size_t bps = maxval < 256 ? 1 : 2;
  if (bytes.size() < cur.pos() + n * bps) throw DataError(path + ": PGM raster is truncated");
  const unsigned char* p = bytes.data() + cur.pos();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bps == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    if (v > maxval) throw DataError(path + ": PGM sample exceeds maxval");
    img.pixels[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

ImageD read_pgm_unit(const std::string& path) {
  const PgmImage img = read_pgm(path);
  ImageD out(img.pixels.grid());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(img.pixels[i]) / img.maxval;
  return out;
}

void write_pgm(const std::string& path, const GrayFrame& image, std::uint16_t maxval) {
  if (maxval == 0) throw ConfigError("PGM maxval must be positive");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> raster;
  raster.reserve(image.size() * 2);
  for (std::uint16_t v : image.pixels()) {
    const std::uint16_t c = std::min(v, maxval);
    if (maxval < 256) {
      raster.push_back(static_cast<unsigned char>(c));
    } else {
      raster.push_back(static_cast<unsigned char>(c >> 8));
      raster.push_back(static_cast<unsigned char>(c & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("write failed on " + path);
}

void write_pgm_scaled(const std::string& path, const ImageD& image) {
  double top = 0.0;
  for (double v : image.pixels()) {
    if (std::isfinite(v)) top = std::max(top, v);
  }
  GrayFrame g(image.grid());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = image[i];
    if (top > 0.0 && std::isfinite(v) && v > 0.0) {
      g[i] = static_cast<std::uint16_t>(std::lround(std::min(v / top, 1.0) * 65535.0));
    }
  }
  write_pgm(path, g, 65535);
}

void write_csv(const std::string& path, const ImageD& image) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  char buf[32];
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (x) out << ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, image(x, y), std::chars_format::general, 17);
      out.write(buf, p - buf);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed on " + path);
}

ImageD read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<double> values;
  int width = -1;
  int height = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int cols = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size()) {
        throw DataError(path + ": bad number '" + cell + "' on row " + std::to_string(height + 1));
      }
      values.push_back(v);
      ++cols;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width < 0) width = cols;
    if (cols != width) throw DataError(path + ": row " + std::to_string(height + 1) + " has the wrong length");
    ++height;
  }
  if (height == 0) throw DataError(path + ": empty CSV image");
  return ImageD(Grid{width, height}, std::move(values));
}

}  // namespace qdistill
