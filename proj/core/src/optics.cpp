#include "qdistill/optics.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qdistill/error.hpp"

namespace qdistill {

namespace {

void check_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) {
    throw ConfigError(std::string(what) + ": grid " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                      " does not match sensor " + std::to_string(a.width) + "x" + std::to_string(a.height));
  }
}

}  // namespace

ObjectMask::ObjectMask(ImageD transmittance) : t_(std::move(transmittance)) {
  for (double v : t_.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("mask transmittance outside [0, 1]");
  }
}

void SceneConfig::validate() const {
  if (!grid.valid()) throw ConfigError("scene grid must be non-empty");
  check_same_grid(grid, quantum_mask.grid(), "quantum mask");
  check_same_grid(grid, classical_mask.grid(), "classical mask");
  if (pairs) {
    if (!(pairs->mean_pair_rate > 0.0) || !std::isfinite(pairs->mean_pair_rate))
      throw ConfigError("pair rate must be > 0");
    if (!(pairs->correlation_width_um >= 0.0)) throw ConfigError("correlation width must be >= 0");
    if (pairs->marginal.size() != 0) {
      check_same_grid(grid, pairs->marginal.grid(), "marginal profile");
      double sum = 0.0;
      for (double v : pairs->marginal.pixels()) {
        if (!(v >= 0.0)) throw ConfigError("marginal profile must be non-negative");
        sum += v;
      }
      if (!(sum > 0.0)) throw ConfigError("marginal profile is all zero");
    }
  }
  if (classical) {
    check_same_grid(grid, classical->mean_intensity.grid(), "classical intensity map");
    for (double v : classical->mean_intensity.pixels()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("classical intensity must be finite and >= 0");
    }
  }
}

// ---------------------------------------------------------------- pairs

PairSampler::PairSampler(const PairSource& source, Grid grid, double pixel_pitch_um)
    : grid_(grid),
      mean_rate_(source.mean_pair_rate),
      sigma_px_(source.correlation_width_um / pixel_pitch_um),
      uniform_(source.marginal.size() == 0) {
  if (!grid.valid()) throw ConfigError("pair sampler needs a non-empty grid");
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("pixel pitch must be > 0");
  if (!(mean_rate_ > 0.0)) throw ConfigError("pair rate must be > 0");
  if (!(sigma_px_ >= 0.0)) throw ConfigError("correlation width must be >= 0");
  if (!uniform_) {
    check_same_grid(grid, source.marginal.grid(), "marginal profile");
    marginal_ = std::discrete_distribution<std::size_t>(source.marginal.pixels().begin(),
                                                         source.marginal.pixels().end());
  }
}

Pixel PairSampler::draw_first(Engine& rng) const {
  std::size_t idx;
  if (uniform_) {
    idx = std::min(static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(grid_.size())), grid_.size() - 1);
  } else {
    idx = marginal_(rng);
  }
  const auto w = static_cast<std::size_t>(grid_.width);
  return Pixel{static_cast<int>(idx % w), static_cast<int>(idx / w)};
}

void PairSampler::sample(Engine& rng, std::vector<PhotonPair>& out) const {
  const int n = boost::random::poisson_distribution<int, double>(mean_rate_)(rng);
  out.reserve(out.size() + static_cast<std::size_t>(n));
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const Pixel first = draw_first(rng);
    if (sigma_px_ == 0.0) {
      out.push_back({first, first});
      continue;
    }
    // One draw gives both sub-pixel offsets at 2^-32 resolution.
    const std::uint64_t bits = rng();
    const double px = first.x + static_cast<double>(bits >> 32) * 0x1.0p-32;
    const double py = first.y + static_cast<double>(bits & 0xffffffffu) * 0x1.0p-32;
    Pixel second;
    do {
      second.x = static_cast<int>(std::floor(px + sigma_px_ * gauss(rng)));
      second.y = static_cast<int>(std::floor(py + sigma_px_ * gauss(rng)));
    } while (!grid_.contains(second));
    out.push_back({first, second});
  }
}

std::vector<PhotonPair> sample_pairs(const PairSource& source, Grid grid, double pixel_pitch_um, Engine& rng) {
  std::vector<PhotonPair> out;
  PairSampler(source, grid, pixel_pitch_um).sample(rng, out);
  return out;
}

namespace {

// Opaque and clear pixels decide without a draw.
bool survives(double p, Engine& rng) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return unit_draw(rng) < p;
}

}  // namespace

int transmit_pair(const PhotonPair& pair, const ObjectMask& mask, Engine& rng, std::vector<PhotonRecord>& out) {
  const bool a = survives(mask.survival(pair.first), rng);
  const bool b = survives(mask.survival(pair.second), rng);
  if (a && b) {
    out.push_back({pair.first, PhotonOrigin::kPairBoth});
    out.push_back({pair.second, PhotonOrigin::kPairBoth});
    return 2;
  }
  if (a) {
    out.push_back({pair.first, PhotonOrigin::kPairSingleSurvivor});
    return 1;
  }
  if (b) {
    out.push_back({pair.second, PhotonOrigin::kPairSingleSurvivor});
    return 1;
  }
  return 0;
}

std::vector<PhotonRecord> transmit_pair(const PhotonPair& pair, const ObjectMask& mask, Engine& rng) {
  std::vector<PhotonRecord> out;
  transmit_pair(pair, mask, rng, out);
  return out;
}

// ------------------------------------------------------------ classical

struct ClassicalSampler::Pixels {
  std::vector<std::uint32_t> index;  // pixels with nonzero mean
  std::vector<boost::random::poisson_distribution<int, double>> dist;
};

ClassicalSampler::ClassicalSampler(const ClassicalSource& source, const ObjectMask& mask)
    : grid_(source.mean_intensity.grid()) {
  check_same_grid(grid_, mask.grid(), "classical mask");
  auto pixels = std::make_shared<Pixels>();
  for (int y = 0; y < grid_.height; ++y) {
    for (int x = 0; x < grid_.width; ++x) {
      const double mean = source.mean_intensity(x, y) * mask.survival({x, y});
      if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("classical intensity must be finite and >= 0");
      if (mean > 0.0) {
        pixels->index.push_back(static_cast<std::uint32_t>(grid_.index(x, y)));
        pixels->dist.emplace_back(mean);
      }
    }
  }
  pixels_ = std::move(pixels);
}

std::uint64_t ClassicalSampler::add_counts(Engine& rng, CountImage& counts) const {
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < pixels_->index.size(); ++j) {
    auto dist = pixels_->dist[j];
    const int k = dist(rng);
    counts[pixels_->index[j]] += k;
    total += static_cast<std::uint64_t>(k);
  }
  return total;
}

void ClassicalSampler::sample(Engine& rng, std::vector<PhotonRecord>& out) const {
  const auto w = static_cast<std::uint32_t>(grid_.width);
  for (std::size_t j = 0; j < pixels_->index.size(); ++j) {
    auto dist = pixels_->dist[j];
    const int k = dist(rng);
    const std::uint32_t i = pixels_->index[j];
    const Pixel p{static_cast<int>(i % w), static_cast<int>(i / w)};
    for (int n = 0; n < k; ++n) out.push_back({p, PhotonOrigin::kClassical});
  }
}

std::vector<PhotonRecord> sample_classical(const ClassicalSource& source, const ObjectMask& mask, Engine& rng) {
  std::vector<PhotonRecord> out;
  ClassicalSampler(source, mask).sample(rng, out);
  return out;
}

CountImage render_frame_counts(const std::vector<PhotonRecord>& records, Grid grid) {
  CountImage counts(grid, 0);
  for (const auto& r : records) {
    if (!grid.contains(r.pixel)) throw DataError("photon record outside the sensor grid");
    counts(r.pixel.x, r.pixel.y) += 1;
  }
  return counts;
}

// ------------------------------------------------------------ generator

PhotonGenerator::PhotonGenerator(const SceneConfig& scene, double pixel_pitch_um)
    : grid_(scene.grid), quantum_mask_(scene.quantum_mask) {
  scene.validate();
  if (scene.pairs) pairs_.emplace(*scene.pairs, scene.grid, pixel_pitch_um);
  if (scene.classical) classical_.emplace(*scene.classical, scene.classical_mask);
}

PhotonTally PhotonGenerator::generate(Engine& rng, CountImage& counts, CountImage* singles) const {
  PhotonTally tally;
  if (counts.grid() != grid_) counts = CountImage(grid_, 0);
  std::fill(counts.data().begin(), counts.data().end(), 0);
  if (singles && singles->grid() != grid_) *singles = CountImage(grid_, 0);
  if (pairs_) {
    std::vector<PhotonPair> pairs;
    pairs_->sample(rng, pairs);
    tally.pairs_emitted = pairs.size();
    std::vector<PhotonRecord> records;
    records.reserve(2 * pairs.size());
    for (const auto& p : pairs) transmit_pair(p, quantum_mask_, rng, records);
    for (const auto& r : records) {
      counts(r.pixel.x, r.pixel.y) += 1;
      if (r.origin == PhotonOrigin::kPairBoth) {
        ++tally.pair_both;
      } else {
        ++tally.single_survivor;
        if (singles) (*singles)(r.pixel.x, r.pixel.y) += 1;
      }
    }
  }
  if (classical_) tally.classical = classical_->add_counts(rng, counts);
  return tally;
}

}  // namespace qdistill
