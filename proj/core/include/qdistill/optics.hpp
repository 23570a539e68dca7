#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "qdistill/image.hpp"
#include "qdistill/rng.hpp"

namespace qdistill {

/// Amplitude transmittance t(r) in [0, 1]; a photon crossing pixel r survives
/// with probability t(r)^2.
class ObjectMask {
 public:
  ObjectMask() = default;
  explicit ObjectMask(ImageD transmittance);

  static ObjectMask transparent(Grid grid) { return ObjectMask(ImageD(grid, 1.0)); }
  static ObjectMask opaque(Grid grid) { return ObjectMask(ImageD(grid, 0.0)); }

  const Grid& grid() const { return t_.grid(); }
  double t(Pixel p) const { return t_(p.x, p.y); }
  double survival(Pixel p) const { return t(p) * t(p); }
  const ImageD& transmittance() const { return t_; }

 private:
  ImageD t_;
};

struct PairSource {
  double mean_pair_rate = 0.0;        ///< expected pairs per frame
  double correlation_width_um = 0.0;  ///< std of the image-plane pair separation, per axis
  ImageD marginal;                    ///< relative illumination; empty means uniform
};

struct ClassicalSource {
  ImageD mean_intensity;  ///< expected photons per pixel per frame
};

enum class PhotonOrigin : std::uint8_t { kPairBoth, kPairSingleSurvivor, kClassical };

struct PhotonRecord {
  Pixel pixel;
  PhotonOrigin origin = PhotonOrigin::kClassical;
};

struct PhotonPair {
  Pixel first;
  Pixel second;
};

/// Everything upstream of the camera: sources and the two objects.
struct SceneConfig {
  Grid grid;
  std::optional<PairSource> pairs;
  std::optional<ClassicalSource> classical;
  ObjectMask quantum_mask;    ///< object seen by the pair source
  ObjectMask classical_mask;  ///< object seen by the classical source

  /// Throws ConfigError when dimensions or parameters are out of range.
  void validate() const;
};

/// Per-frame photon tallies by origin.
struct PhotonTally {
  std::uint64_t pairs_emitted = 0;
  std::uint64_t pair_both = 0;
  std::uint64_t single_survivor = 0;
  std::uint64_t classical = 0;

  PhotonTally& operator+=(const PhotonTally& o) {
    pairs_emitted += o.pairs_emitted;
    pair_both += o.pair_both;
    single_survivor += o.single_survivor;
    classical += o.classical;
    return *this;
  }
};

/// Draws photon pairs on the sensor grid.
///
/// Pair count per frame is Poisson(mean_pair_rate). The first photon's pixel
/// follows the marginal profile and gets a uniform sub-pixel position; the
/// partner is displaced by an isotropic Gaussian of the configured width and
/// the displacement is redrawn until the partner lands on the grid.
class PairSampler {
 public:
  PairSampler(const PairSource& source, Grid grid, double pixel_pitch_um);

  void sample(Engine& rng, std::vector<PhotonPair>& out) const;
  double sigma_pixels() const { return sigma_px_; }
  const Grid& grid() const { return grid_; }

 private:
  Pixel draw_first(Engine& rng) const;

  Grid grid_;
  double mean_rate_;
  double sigma_px_;
  bool uniform_;
  mutable std::discrete_distribution<std::size_t> marginal_;
};

std::vector<PhotonPair> sample_pairs(const PairSource& source, Grid grid, double pixel_pitch_um, Engine& rng);

/// Bernoulli thinning of both photons at their own pixels. Appends the
/// survivors to `out` and returns how many were appended.
int transmit_pair(const PhotonPair& pair, const ObjectMask& mask, Engine& rng, std::vector<PhotonRecord>& out);
std::vector<PhotonRecord> transmit_pair(const PhotonPair& pair, const ObjectMask& mask, Engine& rng);

/// Independent Poisson counts with mean mean_intensity(r) * t(r)^2.
class ClassicalSampler {
 public:
  ClassicalSampler(const ClassicalSource& source, const ObjectMask& mask);

  /// Adds this frame's classical photon counts into `counts`; returns the total.
  std::uint64_t add_counts(Engine& rng, CountImage& counts) const;
  void sample(Engine& rng, std::vector<PhotonRecord>& out) const;

 private:
  struct Pixels;  // per-pixel samplers, defined with the implementation
  Grid grid_;
  std::shared_ptr<const Pixels> pixels_;
};

std::vector<PhotonRecord> sample_classical(const ClassicalSource& source, const ObjectMask& mask, Engine& rng);

CountImage render_frame_counts(const std::vector<PhotonRecord>& records, Grid grid);

/// One frame of photon arrivals at the sensor for a whole scene.
class PhotonGenerator {
 public:
  PhotonGenerator(const SceneConfig& scene, double pixel_pitch_um);

  /// Fills `counts` with the photon image; when `singles` is non-null the
  /// single-survivor photons are also added there.
  PhotonTally generate(Engine& rng, CountImage& counts, CountImage* singles = nullptr) const;

  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  std::optional<PairSampler> pairs_;
  std::optional<ClassicalSampler> classical_;
  ObjectMask quantum_mask_;
};

}  // namespace qdistill
