#pragma once

#include <cstdint>
#include <optional>

#include "qdistill/camera.hpp"
#include "qdistill/correlator.hpp"
#include "qdistill/image.hpp"

namespace qdistill {

/// What is scaled and subtracted from the direct image to leave the classical one.
enum class SubtractionBasis : std::uint8_t {
  /// Pair-detection intensity: sum of Gamma(r, r + d) over |d|_inf <= R, d != 0.
  /// Drops where a photon's partner was blocked, so single survivors stay in C.
  kPairMarginal,
  /// sqrt(max(Gamma(r, r), 0)).
  kSqrtDiagonal,
};

struct DistillOptions {
  SubtractionBasis basis = SubtractionBasis::kPairMarginal;
  double calibration_quantile = 0.75;  ///< calibration pixels: Q at or above this quantile
  double signal_z = 5.0;               ///< mean(Q) must exceed this many standard errors
  double edge_threshold = 0.5;         ///< object support: Q >= threshold * plateau
  int edge_radius = 2;                 ///< pixels flagged on either side of a support edge
  int basis_radius = 0;                ///< R for the pair-marginal basis; 0 picks it from the data
};

/// D(r) = <I(r)> - x0.
ImageD direct_intensity(const FrameStack& stack, double noise_mean);
ImageD direct_intensity(const ImageD& mean, double noise_mean);

struct QuantumImage {
  ImageD q;                ///< Gamma(r, r), raw (may be negative)
  ImageD object_estimate;  ///< (max(Q, 0) / max Q)^(1/4); zero without signal
  bool has_signal = false;
  double mean_z = 0.0;     ///< mean(Q) over its standard error
};

QuantumImage quantum_image(const CorrelationResult& res, const DistillOptions& options = {});

/// Sum of Gamma(r, r + d) over 0 < |d|_inf <= radius (the whole window when
/// radius is 0).
ImageD pair_marginal(const CorrelationResult& res, int radius = 0);

/// Outermost Chebyshev ring of the minus projection whose sum stands more than
/// `z` noise units above zero. The noise of one P(d) value is taken from the
/// spread of the outermost ring. At least 1.
int coincidence_radius(const MinusCoordinateMap& map, double z = 3.0);

struct ClassicalImage {
  ImageD c;
  double scale = 0.0;  ///< fitted c
  bool calibrated = false;
  std::size_t calibration_pixels = 0;
};

/// C = D - c B, with c the least-squares fit of D by B over the top-quantile
/// Q pixels, leaving out pixels set in `exclude` unless that empties the set.
/// B is `basis` when given, else sqrt(max(Q, 0)).
ClassicalImage classical_image(const ImageD& direct, const QuantumImage& quantum, const DistillOptions& options = {},
                               const ImageD* basis = nullptr, const Image<std::uint8_t>* exclude = nullptr);

/// R = C - G.
ImageD residual_map(const ImageD& classical, const ImageD& ground_truth);

/// Pixels within `edge_radius` of the boundary of the thresholded quantum image.
Image<std::uint8_t> residual_edge_flags(const QuantumImage& quantum, const DistillOptions& options = {});

struct DistillationResult {
  ImageD direct;
  QuantumImage quantum;
  ClassicalImage classical;
  Image<std::uint8_t> edge_flags;
  std::optional<ImageD> residual;
  int basis_radius = 0;  ///< pair-marginal radius used, 0 for the other basis
};

DistillationResult distill(const CorrelationResult& res, const ImageD& direct, const DistillOptions& options = {},
                           const ImageD* classical_truth = nullptr);

/// Pearson correlation over pixels where `include` is nonzero (all when null).
double pearson(const ImageD& a, const ImageD& b, const Image<std::uint8_t>* include = nullptr);

}  // namespace qdistill
