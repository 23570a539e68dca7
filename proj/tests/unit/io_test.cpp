#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "oracle.hpp"
#include "qdistill/container.hpp"
#include "qdistill/error.hpp"
#include "qdistill/image_io.hpp"
#include "qdistill/qdif.hpp"
#include "temp_dir.hpp"

using namespace qdistill;

TEST(Qdif, HeaderLayoutIsBitExact) {
  TempDir dir;
  FrameStack s;
  s.info = {Grid{3, 2}, 2, 6.0f};
  s.data = {1, 2, 3, 4, 5, 0xBEEF, 7, 8, 9, 10, 11, 12};
  write_qdif(dir.file("a.qdif"), s);
  const auto b = file_bytes(dir.file("a.qdif"));
  ASSERT_EQ(b.size(), 36u + 3 * 2 * 2 * 2);
  EXPECT_EQ(std::memcmp(b.data(), "QDIF", 4), 0);
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 3);  // width, LE
  EXPECT_EQ(b[6] | b[7] | b[8], 0);
  EXPECT_EQ(b[9], 2);  // height
  EXPECT_EQ(b[13], 2);  // n_frames
  for (int i = 14; i < 21; ++i) EXPECT_EQ(b[i], 0);
  // 6.0f = 0x40C00000, little-endian.
  EXPECT_EQ(b[21], 0x00);
  EXPECT_EQ(b[22], 0x00);
  EXPECT_EQ(b[23], 0xC0);
  EXPECT_EQ(b[24], 0x40);
  for (int i = 25; i < 36; ++i) EXPECT_EQ(b[i], 0);
  EXPECT_EQ(b[36], 1);
  EXPECT_EQ(b[37], 0);
  EXPECT_EQ(b[36 + 10], 0xEF);  // pixel 5 of frame 0
  EXPECT_EQ(b[36 + 11], 0xBE);
}

TEST(Qdif, RoundTrip) {
  TempDir dir;
  auto s = oracle::random_stack(7, 5, 33, 1, 65535);
  s.info.exposure_ms = 2.5f;
  write_qdif(dir.file("s.qdif"), s);
  const FrameStack r = read_qdif(dir.file("s.qdif"));
  EXPECT_EQ(r.info.grid, s.info.grid);
  EXPECT_EQ(r.info.n_frames, s.info.n_frames);
  EXPECT_EQ(r.info.exposure_ms, 2.5f);
  EXPECT_EQ(r.data, s.data);
}

TEST(Qdif, HashIsFnv1aOfPayload) {
  TempDir dir;
  FrameStack s;
  s.info = {Grid{1, 1}, 2, 0.0f};
  s.data = {0x0061, 0x0000};  // payload bytes: 'a' 00 00 00
  QdifWriter w(dir.file("h.qdif"), s.info.grid, 0.0f);
  for (int l = 0; l < 2; ++l) w.write(s.frame(l));
  w.close();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : {0x61, 0x00, 0x00, 0x00}) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  EXPECT_EQ(w.payload_hash(), h);
  QdifReader r(dir.file("h.qdif"));
  std::vector<std::uint16_t> f(1);
  while (r.next(f)) {
  }
  EXPECT_EQ(r.payload_hash(), h);
}

TEST(Qdif, TruncatedStackNamesFailingFrame) {
  TempDir dir;
  const auto s = oracle::random_stack(4, 4, 10, 2, 100);
  write_qdif(dir.file("t.qdif"), s);
  // Keep frames 0..5 and half of frame 6.
  std::filesystem::resize_file(dir.file("t.qdif"), 36 + 32 * 6 + 16);
  QdifReader r(dir.file("t.qdif"));
  std::vector<std::uint16_t> f(16);
  for (int l = 0; l < 6; ++l) EXPECT_TRUE(r.next(f));
  try {
    r.next(f);
    FAIL() << "expected CorruptStackError";
  } catch (const CorruptStackError& e) {
    EXPECT_EQ(e.frame_index(), 6u);
    EXPECT_NE(std::string(e.what()).find("frame 6"), std::string::npos);
  }
}

TEST(Qdif, RejectsBadMagicVersionAndTrailingBytes) {
  TempDir dir;
  const auto s = oracle::random_stack(2, 2, 3, 3, 100);
  write_qdif(dir.file("ok.qdif"), s);
  auto bytes = file_bytes(dir.file("ok.qdif"));

  auto put = [&](const std::string& name, const std::vector<unsigned char>& b) {
    std::ofstream(dir.file(name), std::ios::binary).write(reinterpret_cast<const char*>(b.data()), b.size());
    return dir.file(name);
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(QdifReader{put("m.qdif", bad_magic)}, DataError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(QdifReader{put("v.qdif", bad_version)}, DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  trailing.push_back(0);
  EXPECT_THROW(QdifReader{put("x.qdif", trailing)}, DataError);
  EXPECT_THROW(QdifReader{put("short.qdif", std::vector<unsigned char>(bytes.begin(), bytes.begin() + 20))},
               DataError);
  EXPECT_THROW(QdifReader{dir.file("missing.qdif")}, DataError);
}

TEST(Qdif, WriterRejectsWrongFrameSize) {
  TempDir dir;
  QdifWriter w(dir.file("w.qdif"), Grid{2, 2}, 1.0f);
  std::vector<std::uint16_t> f(3);
  EXPECT_THROW(w.write(f), CorruptStackError);
}

TEST(Container, RoundTripIsLossless) {
  TempDir dir;
  const auto s = oracle::random_stack(6, 5, 40, 4, 65535);
  auto res = finalize_gamma(accumulate(s, 2));
  res.source_hash = 0x0123456789abcdefull;
  write_correlation(dir.file("c.qdcr"), res);
  const auto back = read_correlation(dir.file("c.qdcr"));
  EXPECT_EQ(back, res);
  const auto b = file_bytes(dir.file("c.qdcr"));
  EXPECT_EQ(b.size(), 40u + 8u * (2 + 25) * 30);
  EXPECT_EQ(std::memcmp(b.data(), "QDCR", 4), 0);
  EXPECT_EQ(b[16], 2);  // window radius
  EXPECT_EQ(b[24], 40);  // n_frames
  EXPECT_EQ(b[32], 0xef);  // hash, LE
}

TEST(Container, RejectsTruncationAndBadMagic) {
  TempDir dir;
  const auto res = finalize_gamma(accumulate(oracle::random_stack(3, 3, 5, 5, 9), 1));
  write_correlation(dir.file("c.qdcr"), res);
  std::filesystem::resize_file(dir.file("c.qdcr"), std::filesystem::file_size(dir.file("c.qdcr")) - 8);
  EXPECT_THROW(read_correlation(dir.file("c.qdcr")), DataError);
  write_text(dir.file("junk.qdcr"), "QDIFxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
  EXPECT_THROW(read_correlation(dir.file("junk.qdcr")), DataError);
}

TEST(Pgm, EightAndSixteenBitRoundTrip) {
  TempDir dir;
  GrayFrame img(Grid{3, 2}, 0);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint16_t>(40 * i);
  write_pgm(dir.file("a.pgm"), img, 255);
  auto r = read_pgm(dir.file("a.pgm"));
  EXPECT_EQ(r.maxval, 255);
  EXPECT_EQ(r.pixels, img);
  EXPECT_EQ(file_bytes(dir.file("a.pgm")).size(), std::string("P5\n3 2\n255\n").size() + 6);

  img[5] = 60000;
  write_pgm(dir.file("b.pgm"), img, 65535);
  r = read_pgm(dir.file("b.pgm"));
  EXPECT_EQ(r.maxval, 65535);
  EXPECT_EQ(r.pixels, img);
  const auto b = file_bytes(dir.file("b.pgm"));
  EXPECT_EQ(b[b.size() - 2], 60000 >> 8);  // big-endian samples
  EXPECT_EQ(b[b.size() - 1], 60000 & 0xff);
}

TEST(Pgm, PlainFormatWithComments) {
  TempDir dir;
  write_text(dir.file("p.pgm"), "P2\n# a comment\n2 2\n# another\n10\n0 5\n10 2\n");
  const auto r = read_pgm(dir.file("p.pgm"));
  EXPECT_EQ(r.maxval, 10);
  EXPECT_EQ(r.pixels[1], 5);
  const ImageD u = read_pgm_unit(dir.file("p.pgm"));
  EXPECT_DOUBLE_EQ(u[2], 1.0);
  EXPECT_DOUBLE_EQ(u[3], 0.2);
  write_text(dir.file("bad.pgm"), "P2\n2 2\n10\n0 5\n11 2\n");
  EXPECT_THROW(read_pgm(dir.file("bad.pgm")), DataError);
  write_text(dir.file("short.pgm"), "P5\n4 4\n255\nabc");
  EXPECT_THROW(read_pgm(dir.file("short.pgm")), DataError);
}

TEST(Pgm, ScaledExportClipsNegatives) {
  TempDir dir;
  ImageD img(Grid{3, 1}, 0.0);
  img[0] = -4.0;
  img[1] = 1.0;
  img[2] = 2.0;
  write_pgm_scaled(dir.file("s.pgm"), img);
  const auto r = read_pgm(dir.file("s.pgm"));
  EXPECT_EQ(r.pixels[0], 0);
  EXPECT_EQ(r.pixels[1], 32768);
  EXPECT_EQ(r.pixels[2], 65535);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir;
  ImageD img(Grid{4, 3}, 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::sin(static_cast<double>(i)) * 1e5 / 3.0 - 7.0;
  img[0] = -0.0;
  img[1] = 1e-300;
  write_csv(dir.file("a.csv"), img);
  EXPECT_EQ(read_csv(dir.file("a.csv")), img);
  write_text(dir.file("ragged.csv"), "1,2\n3\n");
  EXPECT_THROW(read_csv(dir.file("ragged.csv")), DataError);
  write_text(dir.file("nan.csv"), "1,x\n");
  EXPECT_THROW(read_csv(dir.file("nan.csv")), DataError);
}
