#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qdistill/image.hpp"
#include "qdistill/optics.hpp"
#include "qdistill/rng.hpp"

namespace qdistill {

enum class GainMode : std::uint8_t {
  kDeterministic,  ///< I = A k + read noise
  kStochastic,     ///< each photoelectron gets an exponential gain of mean A
};

/// EMCCD-style detector: quantum-efficiency thinning, amplification
/// I_k = A k + x0, Gaussian read noise, round-half-up and clamp.
struct CameraModel {
  double quantum_efficiency = 0.7;  ///< eta
  double gain = 100.0;              ///< A, gray levels per photoelectron
  double noise_mean = 167.0;        ///< x0 (mu0), gray levels
  double noise_std = 32.0;          ///< sigma0, gray levels
  double pixel_pitch_um = 16.0;     ///< delta
  int bit_depth = 16;
  GainMode gain_mode = GainMode::kDeterministic;
  float exposure_ms = 6.0f;

  std::uint32_t max_gray() const { return (1u << bit_depth) - 1u; }
  void validate() const;
};

/// Geometry and length of a frame stack.
struct StackInfo {
  Grid grid;
  std::uint64_t n_frames = 0;
  float exposure_ms = 0.0f;

  std::size_t frame_pixels() const { return grid.size(); }
};

/// Frames held in memory, row-major, frame after frame.
struct FrameStack {
  StackInfo info;
  std::vector<std::uint16_t> data;

  std::span<const std::uint16_t> frame(std::uint64_t l) const {
    return std::span<const std::uint16_t>(data).subspan(l * info.frame_pixels(), info.frame_pixels());
  }
};

/// Receives frames strictly in acquisition order.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void write(std::span<const std::uint16_t> frame) = 0;
};

class StackCollector : public FrameSink {
 public:
  StackCollector(Grid grid, float exposure_ms) { stack_.info = {grid, 0, exposure_ms}; }
  void write(std::span<const std::uint16_t> frame) override;
  FrameStack& stack() { return stack_; }

 private:
  FrameStack stack_;
};

/// Fans one frame stream out to several sinks.
class TeeSink : public FrameSink {
 public:
  explicit TeeSink(std::vector<FrameSink*> sinks) : sinks_(std::move(sinks)) {}
  void write(std::span<const std::uint16_t> frame) override {
    for (auto* s : sinks_) s->write(frame);
  }

 private:
  std::vector<FrameSink*> sinks_;
};

CountImage detect(const CountImage& counts, const CameraModel& camera, Engine& rng);

/// Converts photoelectrons to gray levels. `clamped`, when given, is
/// incremented once per pixel that hit 0 or the top code.
GrayFrame amplify(const CountImage& photoelectrons, const CameraModel& camera, Engine& rng,
                  std::uint64_t* clamped = nullptr);

struct SimulationOptions {
  unsigned threads = 1;
  std::size_t batch_frames = 64;
  bool record_singles = false;  ///< accumulate the single-survivor photon map
};

struct SimulationSummary {
  std::uint64_t frames = 0;
  double mean_gray = 0.0;
  std::uint64_t clamped_pixels = 0;
  PhotonTally photons;
  std::optional<Image<std::uint64_t>> singles;  ///< per-pixel single-survivor photon totals
};

/// Streams `n_frames` simulated frames into `sink` in order. Frame l draws its
/// randomness only from frame_engine(seed, l, ...), so output does not
/// depend on the thread count.
SimulationSummary simulate_stack(const SceneConfig& scene, const CameraModel& camera, std::uint64_t n_frames,
                                 std::uint64_t seed, FrameSink& sink, const SimulationOptions& options = {});

/// Expected classical contribution in gray levels above x0: A eta lambda(r) t2(r)^2.
ImageD classical_ground_truth(const SceneConfig& scene, const CameraModel& camera);

/// |O1(r)|^4 for the object crossed by the pairs.
ImageD quantum_ground_truth(const SceneConfig& scene);

/// Pair rate giving a mean gray level `target_gray` (including x0) for a
/// uniform marginal through a transparent object.
double pair_rate_for_gray(double target_gray, const CameraModel& camera, Grid grid);

}  // namespace qdistill
