#pragma once

// Experiment configuration: a line-oriented key = value file with sections.
//
//   [scene]     width, height, pair_rate | quantum_gray, correlation_width_um,
//               pair_profile, quantum_object, classical_intensity | classical_gray,
//               classical_profile, classical_object
//   [camera]    quantum_efficiency, gain, noise_mean, noise_std, pixel_pitch_um,
//               bit_depth, gain_mode, exposure_ms
//   [run]       frames, seed, window_radius, threads
//   [distill]   basis, calibration_quantile, signal_z, edge_threshold, edge_radius
//   [snr]       peak_radius, exclusion_radius
//
// '#' and ';' start comments. Unknown sections or keys, duplicate keys and
// out-of-range values are errors. Relative file paths resolve against the
// config file's directory.
//
// Object and profile values are either a PGM path or a shape expression:
//   transparent | opaque | rect(x0,y0,x1,y1) | disk(cx,cy,r) | a + b + ...
// Shapes are transmitting (t = 1) on an opaque background; '+' is a union.

#include <cstdint>
#include <filesystem>
#include <string>

#include "qdistill/camera.hpp"
#include "qdistill/distill.hpp"
#include "qdistill/optics.hpp"
#include "qdistill/snr.hpp"

namespace qdistill {

struct RunConfig {
  std::uint64_t frames = 1000;
  std::uint64_t seed = 1;
  int window_radius = 5;
  unsigned threads = 1;
};

struct ExperimentConfig {
  SceneConfig scene;
  CameraModel camera;
  RunConfig run;
  DistillOptions distill;
  SweepOptions sweep;  ///< window and threads mirror [run]
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Evaluates an object/profile value on `grid` (see header comment).
ImageD parse_transmittance(const std::string& value, Grid grid, const std::filesystem::path& base_dir);

}  // namespace qdistill
