#include <gtest/gtest.h>

#include <cmath>

#include "qdistill/camera.hpp"
#include "qdistill/error.hpp"

using namespace qdistill;

namespace {

SceneConfig blank(Grid g) {
  SceneConfig s;
  s.grid = g;
  s.quantum_mask = ObjectMask::transparent(g);
  s.classical_mask = ObjectMask::transparent(g);
  return s;
}

}  // namespace

TEST(CameraModel, Validation) {
  CameraModel c;
  EXPECT_NO_THROW(c.validate());
  c.quantum_efficiency = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.gain = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.noise_std = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.bit_depth = 17;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.bit_depth = 12;
  EXPECT_EQ(c.max_gray(), 4095u);
}

TEST(Detect, BinomialThinningRate) {
  const Grid g{1000, 1000};
  CameraModel cam;
  cam.quantum_efficiency = 0.7;
  Engine rng = frame_engine(1, 0, 1);
  const CountImage pe = detect(CountImage(g, 1), cam, rng);
  std::int64_t kept = 0;
  for (int v : pe.pixels()) kept += v;
  const double rate = kept / 1e6;
  EXPECT_GE(rate, 0.698);
  EXPECT_LE(rate, 0.702);
}

TEST(Detect, LargeCountsUseBinomialMean) {
  const Grid g{100, 100};
  CameraModel cam;
  cam.quantum_efficiency = 0.4;
  Engine rng = frame_engine(2, 0, 1);
  const CountImage pe = detect(CountImage(g, 50), cam, rng);
  double s = 0.0;
  for (int v : pe.pixels()) {
    EXPECT_LE(v, 50);
    s += v;
  }
  EXPECT_NEAR(s / 1e4, 20.0, 0.15);
}

TEST(Amplify, ReadNoiseMoments) {
  const Grid g{1000, 1000};
  CameraModel cam;  // x0 = 167, sigma0 = 32
  Engine rng = frame_engine(3, 0, 1);
  const GrayFrame f = amplify(CountImage(g, 0), cam, rng);
  double s = 0.0, sq = 0.0;
  for (auto v : f.pixels()) {
    s += v;
    sq += double(v) * v;
  }
  const double mean = s / 1e6;
  const double sd = std::sqrt(sq / 1e6 - mean * mean);
  EXPECT_NEAR(mean, 167.0, 0.1);
  EXPECT_NEAR(sd, 32.0, 0.1);
}

TEST(Amplify, DeterministicGainWithoutNoiseIsExact) {
  CameraModel cam;
  cam.noise_std = 0.0;
  cam.gain = 100.0;
  Engine rng = frame_engine(4, 0, 1);
  const GrayFrame f = amplify(CountImage(Grid{3, 1}, 3), cam, rng);
  for (auto v : f.pixels()) EXPECT_EQ(v, 467);
}

TEST(Amplify, RoundsHalfUpAndClamps) {
  CameraModel cam;
  cam.noise_std = 0.0;
  cam.noise_mean = 10.5;
  cam.gain = 1000.0;
  cam.bit_depth = 12;
  Engine rng = frame_engine(5, 0, 1);
  CountImage pe(Grid{2, 1}, 0);
  pe[1] = 10;
  std::uint64_t clamped = 0;
  const GrayFrame f = amplify(pe, cam, rng, &clamped);
  EXPECT_EQ(f[0], 11);
  EXPECT_EQ(f[1], 4095);
  EXPECT_EQ(clamped, 1u);
}

TEST(Amplify, StochasticGainMoments) {
  CameraModel cam;
  cam.gain_mode = GainMode::kStochastic;
  cam.noise_std = 0.0;
  cam.noise_mean = 0.0;
  cam.gain = 50.0;
  Engine rng = frame_engine(6, 0, 1);
  const GrayFrame f = amplify(CountImage(Grid{500, 200}, 4), cam, rng);
  double s = 0.0, sq = 0.0;
  for (auto v : f.pixels()) {
    s += v;
    sq += double(v) * v;
  }
  const double n = 1e5;
  const double mean = s / n;
  // Gamma(k=4, scale=A): mean kA, variance kA^2 (+1/12 from rounding).
  EXPECT_NEAR(mean, 200.0, 1.0);
  EXPECT_NEAR(sq / n - mean * mean, 4.0 * 2500.0, 150.0);
}

TEST(SimulateStack, RejectsSingleFrame) {
  StackCollector sink(Grid{4, 4}, 1.0f);
  EXPECT_THROW(simulate_stack(blank(Grid{4, 4}), CameraModel{}, 1, 1, sink), ConfigError);
}

TEST(SimulateStack, NoSourceGivesNoiseFloor) {
  const Grid g{16, 16};
  StackCollector sink(g, 6.0f);
  const auto s = simulate_stack(blank(g), CameraModel{}, 2000, 1, sink);
  EXPECT_EQ(sink.stack().info.n_frames, 2000u);
  EXPECT_NEAR(s.mean_gray, 167.0, 0.1);
  EXPECT_EQ(s.photons.pairs_emitted, 0u);
}

TEST(SimulateStack, IndependentOfThreadsAndBatching) {
  const Grid g{12, 10};
  SceneConfig scene = blank(g);
  scene.pairs = PairSource{20.0, 10.0, {}};
  scene.classical = ClassicalSource{ImageD(g, 0.3)};
  CameraModel cam;
  StackCollector a(g, 1.0f), b(g, 1.0f);
  SimulationOptions one;
  SimulationOptions many;
  many.threads = 3;
  many.batch_frames = 7;
  const auto sa = simulate_stack(scene, cam, 100, 42, a, one);
  const auto sb = simulate_stack(scene, cam, 100, 42, b, many);
  EXPECT_EQ(a.stack().data, b.stack().data);
  EXPECT_EQ(sa.mean_gray, sb.mean_gray);

  StackCollector c(g, 1.0f);
  simulate_stack(scene, cam, 100, 43, c, one);
  EXPECT_NE(a.stack().data, c.stack().data);
}

TEST(SimulateStack, PairRateForGrayHitsTarget) {
  const Grid g{16, 16};
  CameraModel cam;
  SceneConfig scene = blank(g);
  scene.pairs = PairSource{pair_rate_for_gray(400.0, cam, g), 10.0, {}};
  StackCollector sink(g, 1.0f);
  const auto s = simulate_stack(scene, cam, 500, 8, sink);
  EXPECT_NEAR(s.mean_gray, 400.0, 2.0);
  EXPECT_THROW(pair_rate_for_gray(100.0, cam, g), ConfigError);
}

TEST(SimulateStack, RecordsSingleSurvivors) {
  const Grid g{8, 8};
  SceneConfig scene = blank(g);
  scene.pairs = PairSource{30.0, 10.0, {}};
  ImageD t(g, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 4; ++x) t(x, y) = 1.0;
  scene.quantum_mask = ObjectMask(t);
  StackCollector sink(g, 1.0f);
  SimulationOptions opts;
  opts.record_singles = true;
  const auto s = simulate_stack(scene, CameraModel{}, 200, 3, sink, opts);
  ASSERT_TRUE(s.singles.has_value());
  std::uint64_t total = 0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      total += (*s.singles)(x, y);
      if (x >= 4) EXPECT_EQ((*s.singles)(x, y), 0u);
    }
  }
  EXPECT_EQ(total, s.photons.single_survivor);
  // Singles come from pairs straddling the edge, so they pile up next to it.
  std::uint64_t edge = 0;
  for (int y = 0; y < 8; ++y) edge += (*s.singles)(3, y);
  EXPECT_GT(edge * 2, total);
}

TEST(GroundTruth, ClassicalAndQuantumMaps) {
  const Grid g{2, 1};
  SceneConfig scene = blank(g);
  ImageD t(g, 1.0);
  t(1, 0) = 0.5;
  scene.quantum_mask = ObjectMask(t);
  scene.classical_mask = ObjectMask(t);
  scene.classical = ClassicalSource{ImageD(g, 2.0)};
  CameraModel cam;
  cam.gain = 10.0;
  cam.quantum_efficiency = 0.5;
  const ImageD c = classical_ground_truth(scene, cam);
  EXPECT_DOUBLE_EQ(c(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 2.5);
  const ImageD q = quantum_ground_truth(scene);
  EXPECT_DOUBLE_EQ(q(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(q(1, 0), 0.0625);
}
