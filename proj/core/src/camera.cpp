#include "qdistill/camera.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "qdistill/error.hpp"
#include "qdistill/parallel.hpp"

namespace qdistill {

void CameraModel::validate() const {
  if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0)) throw ConfigError("quantum efficiency must be in [0, 1]");
  if (!(gain > 0.0) || !std::isfinite(gain)) throw ConfigError("gain must be > 0");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise std must be >= 0");
  if (!std::isfinite(noise_mean)) throw ConfigError("noise mean must be finite");
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("pixel pitch must be > 0");
  if (bit_depth < 1 || bit_depth > 16) throw ConfigError("bit depth must be in [1, 16]");
  if (!(exposure_ms >= 0.0f)) throw ConfigError("exposure must be >= 0");
}

void StackCollector::write(std::span<const std::uint16_t> frame) {
  if (frame.size() != stack_.info.frame_pixels()) {
    throw CorruptStackError("frame size does not match stack geometry", stack_.info.n_frames);
  }
  stack_.data.insert(stack_.data.end(), frame.begin(), frame.end());
  ++stack_.info.n_frames;
}

CountImage detect(const CountImage& counts, const CameraModel& camera, Engine& rng) {
  const double eta = camera.quantum_efficiency;
  if (eta >= 1.0) return counts;
  CountImage out(counts.grid(), 0);
  if (eta <= 0.0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const int n = counts[i];
    if (n < 0) throw DataError("negative photon count");
    if (n == 0) continue;
    if (n <= 16) {
      int kept = 0;
      for (int j = 0; j < n; ++j) kept += unit_draw(rng) < eta ? 1 : 0;
      out[i] = kept;
    } else {
      out[i] = std::binomial_distribution<int>(n, eta)(rng);
    }
  }
  return out;
}

GrayFrame amplify(const CountImage& photoelectrons, const CameraModel& camera, Engine& rng, std::uint64_t* clamped) {
  GrayFrame out(photoelectrons.grid(), 0);
  boost::random::normal_distribution<double> read_noise(0.0, 1.0);
  const double top = static_cast<double>(camera.max_gray());
  std::uint64_t clamp_count = 0;
  for (std::size_t i = 0; i < photoelectrons.size(); ++i) {
    const int k = photoelectrons[i];
    if (k < 0) throw DataError("negative photoelectron count");
    double signal;
    if (camera.gain_mode == GainMode::kStochastic) {
      signal = k > 0 ? std::gamma_distribution<double>(k, camera.gain)(rng) : 0.0;
    } else {
      signal = camera.gain * k;
    }
    const double v = std::floor(signal + camera.noise_mean + camera.noise_std * read_noise(rng) + 0.5);
    if (v < 0.0) {
      out[i] = 0;
      ++clamp_count;
    } else if (v > top) {
      out[i] = static_cast<std::uint16_t>(camera.max_gray());
      ++clamp_count;
    } else {
      out[i] = static_cast<std::uint16_t>(v);
    }
  }
  if (clamped) *clamped += clamp_count;
  return out;
}

SimulationSummary simulate_stack(const SceneConfig& scene, const CameraModel& camera, std::uint64_t n_frames,
                                 std::uint64_t seed, FrameSink& sink, const SimulationOptions& options) {
  camera.validate();
  if (n_frames < 2) throw ConfigError("a stack needs at least 2 frames");
  const PhotonGenerator generator(scene, camera.pixel_pitch_um);
  const Grid grid = scene.grid;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_frames);

  struct FrameOut {
    GrayFrame gray;
    CountImage singles;
    PhotonTally tally;
    std::uint64_t clamped = 0;
    std::uint64_t gray_sum = 0;
  };
  std::vector<FrameOut> slots(batch);

  SimulationSummary summary;
  if (options.record_singles) summary.singles.emplace(grid, 0);
  long double gray_total = 0.0L;

  for (std::uint64_t start = 0; start < n_frames; start += batch) {
    const std::size_t count = static_cast<std::size_t>(std::min<std::uint64_t>(batch, n_frames - start));
    parallel_for(count, options.threads, [&](std::size_t i) {
      FrameOut& slot = slots[i];
      const std::uint64_t l = start + i;
      Engine optics_rng = frame_engine(seed, l, 0);
      Engine camera_rng = frame_engine(seed, l, 1);
      CountImage photons(grid, 0);
      if (options.record_singles) slot.singles = CountImage(grid, 0);
      slot.tally = generator.generate(optics_rng, photons, options.record_singles ? &slot.singles : nullptr);
      slot.clamped = 0;
      slot.gray = amplify(detect(photons, camera, camera_rng), camera, camera_rng, &slot.clamped);
      std::uint64_t s = 0;
      for (std::uint16_t v : slot.gray.pixels()) s += v;
      slot.gray_sum = s;
    });
    for (std::size_t i = 0; i < count; ++i) {
      sink.write(slots[i].gray.pixels());
      summary.photons += slots[i].tally;
      summary.clamped_pixels += slots[i].clamped;
      gray_total += static_cast<long double>(slots[i].gray_sum);
      if (summary.singles) {
        auto& acc = *summary.singles;
        for (std::size_t p = 0; p < grid.size(); ++p) acc[p] += static_cast<std::uint64_t>(slots[i].singles[p]);
      }
    }
  }
  summary.frames = n_frames;
  summary.mean_gray = static_cast<double>(gray_total / (static_cast<long double>(n_frames) * grid.size()));
  return summary;
}

ImageD classical_ground_truth(const SceneConfig& scene, const CameraModel& camera) {
  ImageD out(scene.grid, 0.0);
  if (!scene.classical) return out;
  for (int y = 0; y < scene.grid.height; ++y) {
    for (int x = 0; x < scene.grid.width; ++x) {
      out(x, y) = camera.gain * camera.quantum_efficiency * scene.classical->mean_intensity(x, y) *
                  scene.classical_mask.survival({x, y});
    }
  }
  return out;
}

ImageD quantum_ground_truth(const SceneConfig& scene) {
  ImageD out(scene.grid, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = scene.quantum_mask.transmittance()[i];
    out[i] = t * t * t * t;
  }
  return out;
}

double pair_rate_for_gray(double target_gray, const CameraModel& camera, Grid grid) {
  if (!(camera.gain * camera.quantum_efficiency > 0.0)) throw ConfigError("camera gain and efficiency must be > 0");
  const double signal = target_gray - camera.noise_mean;
  if (!(signal > 0.0)) throw ConfigError("quantum gray level must exceed the noise mean");
  return signal * static_cast<double>(grid.size()) / (2.0 * camera.gain * camera.quantum_efficiency);
}

}  // namespace qdistill
