#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdistill/camera.hpp"
#include "qdistill/correlator.hpp"
#include "qdistill/optics.hpp"

namespace qdistill {

struct SnrMeasurement {
  double snr = 0.0;
  double peak = 0.0;
  double noise_std = 0.0;
  std::size_t noise_samples = 0;
  bool infinite = false;    ///< background had zero spread
  double snr_error = 0.0;   ///< one-sigma sampling error from the noise-std estimate
};

/// Peak of P over |d|_inf <= peak_radius divided by the sample standard
/// deviation of P over |d|_inf > exclusion_radius.
SnrMeasurement measure_snr(const MinusCoordinateMap& map, int peak_radius = 1, int exclusion_radius = 3);

/// SNR = alpha (sqrt(N) eta / 2) [1 + (sigma0^2 + I_cl) / (beta (I_qu - mu0))]^-1
double snr_model(double n_frames, double eta, double sigma0, double mu0, double i_qu, double i_cl, double alpha,
                 double beta);

struct SnrPoint {
  double ratio = 0.0;  ///< I_cl / I_qu
  double measured_snr = 0.0;
  double snr_error = 0.0;
  double i_qu = 0.0;  ///< mean quantum gray level, including mu0
  double i_cl = 0.0;  ///< mean classical gray level above the noise floor
  std::uint64_t n_frames = 0;
};

struct SnrModelFit {
  double alpha = 0.0;
  double beta = 0.0;
  double alpha_se = 0.0;
  double beta_se = 0.0;
  double r_squared = 0.0;
  double eta = 0.0;
  double sigma0 = 0.0;
  double mu0 = 0.0;
  std::size_t n_points = 0;
  bool converged = false;
  std::string diagnostics;

  double predict(double n_frames, double i_qu, double i_cl) const {
    return snr_model(n_frames, eta, sigma0, mu0, i_qu, i_cl, alpha, beta);
  }
};

/// Least-squares fit of (alpha, beta). alpha is solved in closed form for each
/// beta; beta is located on a log grid and refined by golden-section search.
SnrModelFit fit_model(const std::vector<SnrPoint>& points, double eta, double sigma0, double mu0);

/// Frames needed for the fitted model to predict `target_snr`.
double required_frames(const SnrModelFit& fit, double i_qu, double i_cl, double target_snr);

struct SweepOptions {
  int window_radius = 5;
  int peak_radius = 1;
  int exclusion_radius = 3;
  unsigned threads = 1;
};

struct SweepResult {
  std::vector<SnrPoint> points;
  std::vector<MinusCoordinateMap> maps;
  std::optional<SnrModelFit> fit;
  std::string fit_note;  ///< why no fit was attempted, if so
};

/// Seed used for sweep point `index`.
std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t index);

/// One SNR point: classical light at `ratio` times the quantum level is added
/// to a homogeneous pair-source scene, then simulate, correlate, project, measure.
SnrPoint measure_sweep_point(const SceneConfig& homogeneous_scene, const CameraModel& camera, double ratio,
                             std::uint64_t n_frames, std::uint64_t seed, const SweepOptions& options,
                             MinusCoordinateMap* map_out = nullptr);

SweepResult snr_sweep(const SceneConfig& homogeneous_scene, const CameraModel& camera, const std::vector<double>& ratios,
                      std::uint64_t n_frames, std::uint64_t seed, const SweepOptions& options = {});

}  // namespace qdistill
