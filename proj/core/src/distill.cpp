#include "qdistill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qdistill/error.hpp"

namespace qdistill {

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::floor(std::clamp(q, 0.0, 1.0) * (values.size() - 1)));
  return values[idx];
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw DataError("image grids do not match");
}

}  // namespace

ImageD direct_intensity(const ImageD& mean, double noise_mean) {
  ImageD out(mean.grid(), 0.0);
  for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] - noise_mean;
  return out;
}

ImageD direct_intensity(const FrameStack& stack, double noise_mean) {
  const Grid grid = stack.info.grid;
  if (stack.info.n_frames < 1) throw DataError("direct intensity needs at least one frame");
  std::vector<std::uint64_t> sums(grid.size(), 0);
  for (std::uint64_t l = 0; l < stack.info.n_frames; ++l) {
    const auto f = stack.frame(l);
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += f[i];
  }
  ImageD out(grid, 0.0);
  const long double n = static_cast<long double>(stack.info.n_frames);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out[i] = static_cast<double>(static_cast<long double>(sums[i]) / n) - noise_mean;
  }
  return out;
}

QuantumImage quantum_image(const CorrelationResult& res, const DistillOptions& options) {
  QuantumImage out;
  out.q = res.diagonal;
  out.object_estimate = ImageD(res.grid, 0.0);
  const auto& q = out.q.data();
  const double n = static_cast<double>(q.size());
  double mean = 0.0;
  for (double v : q) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : q) var += (v - mean) * (v - mean);
  var = q.size() > 1 ? var / (n - 1.0) : 0.0;
  const double se = std::sqrt(var / n);
  out.mean_z = se > 0.0 ? mean / se : (mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  const double peak = *std::max_element(q.begin(), q.end());
  out.has_signal = peak > 0.0 && out.mean_z > options.signal_z;
  if (out.has_signal) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      out.object_estimate[i] = std::pow(std::max(q[i], 0.0) / peak, 0.25);
    }
  }
  return out;
}

ImageD pair_marginal(const CorrelationResult& res, int radius) {
  if (radius < 0) throw ConfigError("basis radius must be >= 0");
  ImageD out(res.grid, 0.0);
  const int w = radius == 0 ? res.window_radius : std::min(radius, res.window_radius);
  for (int y = 0; y < res.grid.height; ++y) {
    for (int x = 0; x < res.grid.width; ++x) {
      double sum = 0.0;
      for (int dy = -w; dy <= w; ++dy) {
        for (int dx = -w; dx <= w; ++dx) {
          if ((dx == 0 && dy == 0) || !res.grid.contains(x + dx, y + dy)) continue;
          sum += res.at({x, y}, {dx, dy});
        }
      }
      out(x, y) = sum;
    }
  }
  return out;
}

int coincidence_radius(const MinusCoordinateMap& map, double z) {
  const int w = map.radius;
  if (w < 2) return 1;
  std::vector<double> outer;
  for (int dy = -w; dy <= w; ++dy)
    for (int dx = -w; dx <= w; ++dx)
      if (std::max(std::abs(dx), std::abs(dy)) == w) outer.push_back(map.at({dx, dy}));
  double mean = 0.0;
  for (double v : outer) mean += v;
  mean /= static_cast<double>(outer.size());
  double var = 0.0;
  for (double v : outer) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(outer.size() - 1));
  int radius = 1;
  for (int k = 1; k < w; ++k) {
    double ring = 0.0;
    for (int dy = -k; dy <= k; ++dy)
      for (int dx = -k; dx <= k; ++dx)
        if (std::max(std::abs(dx), std::abs(dy)) == k) ring += map.at({dx, dy});
    if (ring > z * sd * std::sqrt(8.0 * k)) radius = k;
  }
  // Coincidences reaching the last ring mean the window is the limit.
  return radius == w - 1 ? w : radius;
}

ClassicalImage classical_image(const ImageD& direct, const QuantumImage& quantum, const DistillOptions& options,
                               const ImageD* basis, const Image<std::uint8_t>* exclude) {
  require_same_grid(direct.grid(), quantum.q.grid());
  ClassicalImage out;
  out.c = direct;
  if (!quantum.has_signal) return out;

  ImageD b(direct.grid(), 0.0);
  if (basis) {
    require_same_grid(direct.grid(), basis->grid());
    b = *basis;
  } else {
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sqrt(std::max(quantum.q[i], 0.0));
  }

  if (exclude) require_same_grid(direct.grid(), exclude->grid());
  const double threshold = quantile(quantum.q.data(), options.calibration_quantile);
  double num = 0.0;
  double den = 0.0;
  for (int pass = exclude ? 0 : 1; pass < 2 && out.calibration_pixels == 0; ++pass) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (pass == 0 && (*exclude)[i]) continue;
      if (quantum.q[i] >= threshold && quantum.q[i] > 0.0) {
        num += direct[i] * b[i];
        den += b[i] * b[i];
        ++out.calibration_pixels;
      }
    }
  }
  if (out.calibration_pixels == 0 || !(den > 0.0)) {
    out.calibration_pixels = 0;
    return out;
  }
  out.scale = num / den;
  out.calibrated = true;
  for (std::size_t i = 0; i < b.size(); ++i) out.c[i] = direct[i] - out.scale * b[i];
  return out;
}

ImageD residual_map(const ImageD& classical, const ImageD& ground_truth) {
  require_same_grid(classical.grid(), ground_truth.grid());
  ImageD out(classical.grid(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = classical[i] - ground_truth[i];
  return out;
}

Image<std::uint8_t> residual_edge_flags(const QuantumImage& quantum, const DistillOptions& options) {
  const Grid grid = quantum.q.grid();
  Image<std::uint8_t> flags(grid, 0);
  if (!quantum.has_signal) return flags;
  const double plateau = quantile(quantum.q.data(), 0.99);
  Image<std::uint8_t> support(grid, 0);
  for (std::size_t i = 0; i < support.size(); ++i) support[i] = quantum.q[i] >= options.edge_threshold * plateau;
  const int r = options.edge_radius;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      bool edge = false;
      for (int dy = -r; dy <= r && !edge; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (grid.contains(x + dx, y + dy) && support(x + dx, y + dy) != support(x, y)) {
            edge = true;
            break;
          }
        }
      }
      flags(x, y) = edge;
    }
  }
  return flags;
}

DistillationResult distill(const CorrelationResult& res, const ImageD& direct, const DistillOptions& options,
                           const ImageD* classical_truth) {
  require_same_grid(res.grid, direct.grid());
  DistillationResult out;
  out.direct = direct;
  out.quantum = quantum_image(res, options);
  out.edge_flags = residual_edge_flags(out.quantum, options);
  if (options.basis == SubtractionBasis::kPairMarginal) {
    out.basis_radius =
        options.basis_radius > 0 ? std::min(options.basis_radius, res.window_radius) : coincidence_radius(minus_projection(res));
    const ImageD basis = pair_marginal(res, out.basis_radius);
    out.classical = classical_image(direct, out.quantum, options, &basis, &out.edge_flags);
  } else {
    out.classical = classical_image(direct, out.quantum, options, nullptr, &out.edge_flags);
  }
  if (classical_truth) out.residual = residual_map(out.classical.c, *classical_truth);
  return out;
}

double pearson(const ImageD& a, const ImageD& b, const Image<std::uint8_t>* include) {
  require_same_grid(a.grid(), b.grid());
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (include && !(*include)[i]) continue;
    sa += a[i];
    sb += b[i];
    saa += static_cast<long double>(a[i]) * a[i];
    sbb += static_cast<long double>(b[i]) * b[i];
    sab += static_cast<long double>(a[i]) * b[i];
    ++n;
  }
  if (n < 2) return 0.0;
  const long double cov = sab - sa * sb / n;
  const long double va = saa - sa * sa / n;
  const long double vb = sbb - sb * sb / n;
  if (!(va > 0) || !(vb > 0)) return 0.0;
  return static_cast<double>(cov / std::sqrt(va * vb));
}

}  // namespace qdistill
