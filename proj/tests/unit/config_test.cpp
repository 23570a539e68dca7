#include <gtest/gtest.h>

#include "qdistill/config.hpp"
#include "qdistill/error.hpp"
#include "qdistill/image_io.hpp"
#include "temp_dir.hpp"

using namespace qdistill;

TEST(Config, DefaultsWhenSectionsAreEmpty) {
  const auto c = parse_config("[scene]\n[camera]\n[run]\n");
  EXPECT_EQ(c.scene.grid, (Grid{64, 64}));
  EXPECT_FALSE(c.scene.pairs.has_value());
  EXPECT_FALSE(c.scene.classical.has_value());
  EXPECT_DOUBLE_EQ(c.camera.quantum_efficiency, 0.7);
  EXPECT_DOUBLE_EQ(c.camera.noise_mean, 167.0);
  EXPECT_EQ(c.run.window_radius, 5);
  EXPECT_EQ(c.distill.basis, SubtractionBasis::kPairMarginal);
}

TEST(Config, ParsesAllSections) {
  const auto c = parse_config(R"(
# experiment
[scene]
width = 20
height = 10
pair_rate = 150        ; pairs per frame
correlation_width_um = 8
quantum_object = rect(0,0,9,9)
classical_intensity = 0.5
classical_object = disk(15, 5, 2)

[camera]
quantum_efficiency = 0.6
gain = 250
noise_mean = 100
noise_std = 20
pixel_pitch_um = 13
bit_depth = 14
gain_mode = stochastic
exposure_ms = 3

[run]
frames = 5000
seed = 99
window_radius = 3
threads = 2

[distill]
basis = sqrt_diagonal
calibration_quantile = 0.9
signal_z = 4
edge_threshold = 0.4
edge_radius = 1
basis_radius = 2

[snr]
peak_radius = 0
exclusion_radius = 2
)");
  EXPECT_EQ(c.scene.grid, (Grid{20, 10}));
  ASSERT_TRUE(c.scene.pairs);
  EXPECT_DOUBLE_EQ(c.scene.pairs->mean_pair_rate, 150.0);
  EXPECT_DOUBLE_EQ(c.scene.pairs->correlation_width_um, 8.0);
  EXPECT_EQ(c.scene.quantum_mask.t({9, 9}), 1.0);
  EXPECT_EQ(c.scene.quantum_mask.t({10, 0}), 0.0);
  ASSERT_TRUE(c.scene.classical);
  EXPECT_DOUBLE_EQ(c.scene.classical->mean_intensity(0, 0), 0.5);
  EXPECT_EQ(c.scene.classical_mask.t({17, 5}), 1.0);
  EXPECT_EQ(c.scene.classical_mask.t({18, 5}), 0.0);
  EXPECT_EQ(c.camera.gain_mode, GainMode::kStochastic);
  EXPECT_EQ(c.camera.bit_depth, 14);
  EXPECT_FLOAT_EQ(c.camera.exposure_ms, 3.0f);
  EXPECT_EQ(c.run.frames, 5000u);
  EXPECT_EQ(c.run.seed, 99u);
  EXPECT_EQ(c.run.threads, 2u);
  EXPECT_EQ(c.distill.basis, SubtractionBasis::kSqrtDiagonal);
  EXPECT_DOUBLE_EQ(c.distill.calibration_quantile, 0.9);
  EXPECT_EQ(c.distill.edge_radius, 1);
  EXPECT_EQ(c.distill.basis_radius, 2);
  EXPECT_EQ(c.sweep.window_radius, 3);
  EXPECT_EQ(c.sweep.peak_radius, 0);
  EXPECT_EQ(c.sweep.exclusion_radius, 2);
}

TEST(Config, GrayLevelsConvertToRates) {
  const auto c = parse_config("[scene]\nwidth=10\nheight=10\nquantum_gray=367\nclassical_gray=140\n[camera]\ngain=100\nquantum_efficiency=0.7\n");
  ASSERT_TRUE(c.scene.pairs);
  // (367 - 167) * 100 px / (2 * 100 * 0.7)
  EXPECT_NEAR(c.scene.pairs->mean_pair_rate, 200.0 * 100.0 / 140.0, 1e-9);
  EXPECT_NEAR(c.scene.classical->mean_intensity(3, 3), 2.0, 1e-12);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config("[scene]\ncolour = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[optics]\n"), ConfigError);
  EXPECT_THROW(parse_config("width = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nwidth 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nwidth = 3\nwidth = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nwidth =\n"), ConfigError);
}

TEST(Config, RangeChecks) {
  EXPECT_THROW(parse_config("[camera]\nquantum_efficiency = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[camera]\ngain = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[camera]\nnoise_std = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[camera]\nbit_depth = 20\n"), ConfigError);
  EXPECT_THROW(parse_config("[camera]\ngain_mode = fancy\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nwidth = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\npair_rate = -2\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\npair_rate = 2\ncorrelation_width_um = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\npair_rate = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nclassical_intensity = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nframes = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nthreads = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nframes = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[snr]\npeak_radius = 3\nexclusion_radius = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[distill]\nbasis = magic\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\npair_rate = 1\nquantum_gray = 300\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nquantum_gray = 100\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nquantum_object = rect(1,2,3)\n"), ConfigError);
  EXPECT_THROW(parse_config("[scene]\nquantum_object = star(1,2,3)\n"), ConfigError);
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("[scene]\n\nwidth = 10\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Config, PgmMasksResolveRelativeToConfig) {
  TempDir dir;
  GrayFrame m(Grid{4, 2}, 0);
  m[1] = 255;
  m[2] = 51;
  write_pgm(dir.file("mask.pgm"), m, 255);
  write_text(dir.file("exp.ini"), "[scene]\nwidth = 4\nheight = 2\nquantum_object = mask.pgm\npair_rate = 3\n");
  const auto c = load_config(dir.file("exp.ini"));
  EXPECT_DOUBLE_EQ(c.scene.quantum_mask.t({1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(c.scene.quantum_mask.t({2, 0}), 0.2);
  EXPECT_DOUBLE_EQ(c.scene.quantum_mask.t({0, 0}), 0.0);

  write_text(dir.file("wrong.ini"), "[scene]\nwidth = 5\nheight = 2\nquantum_object = mask.pgm\n");
  EXPECT_THROW(load_config(dir.file("wrong.ini")), ConfigError);
  write_text(dir.file("gone.ini"), "[scene]\nquantum_object = nothere.pgm\n");
  EXPECT_THROW(load_config(dir.file("gone.ini")), std::exception);
  EXPECT_THROW(load_config(dir.file("absent.ini")), ConfigError);
}

TEST(Config, PairProfileIsNormalized) {
  const auto c = parse_config("[scene]\nwidth=4\nheight=1\npair_rate=2\npair_profile = rect(0,0,1,0)\n");
  ASSERT_TRUE(c.scene.pairs);
  EXPECT_DOUBLE_EQ(c.scene.pairs->marginal(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.scene.pairs->marginal(3, 0), 0.0);
  EXPECT_THROW(parse_config("[scene]\npair_rate=2\npair_profile = opaque\n"), ConfigError);
}

TEST(Transmittance, ShapeUnion) {
  const ImageD t = parse_transmittance("rect(0,0,1,1) + disk(4,4,1)", Grid{6, 6}, ".");
  EXPECT_EQ(t(1, 1), 1.0);
  EXPECT_EQ(t(2, 2), 0.0);
  EXPECT_EQ(t(4, 5), 1.0);
  EXPECT_EQ(t(5, 5), 0.0);
  EXPECT_EQ(parse_transmittance("opaque", Grid{2, 2}, "."), ImageD(Grid{2, 2}, 0.0));
}

TEST(Config, ShippedExamplesLoad) {
  for (const char* name : {"mixed_scene.ini", "snr_sweep.ini", "quantum_edge.ini"}) {
    const auto c = load_config(std::string(QDISTILL_CONFIG_DIR) + "/" + name);
    EXPECT_TRUE(c.scene.pairs) << name;
  }
  const auto mixed = load_config(std::string(QDISTILL_CONFIG_DIR) + "/mixed_scene.ini");
  // Classical-only part of the frame, and its hole.
  EXPECT_EQ(mixed.scene.classical_mask.t({55, 45}), 1.0);
  EXPECT_EQ(mixed.scene.classical_mask.t({35, 45}), 0.0);
  EXPECT_EQ(mixed.scene.quantum_mask.t({55, 45}), 0.0);
}
