#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdistill/camera.hpp"
#include "qdistill/image.hpp"

namespace qdistill {

/// Offsets d with |d|_inf <= w that are kept explicitly. The other half of
/// the window follows from the product symmetry S(r, d) = S(r + d, -d).
std::vector<Offset> half_window(int window_radius);

/// Integer sums collected in one pass over a frame stack.
///
/// For every pixel r and window offset d:
///   same(r, d)       = sum_l I_l(r) I_l(r+d)                      (l = 1..N)
///   successive(r, d) = sum_l I_l(r) I_{l+1}(r+d) + I_l(r+d) I_{l+1}(r)  (l = 1..N-1)
///   mean_sum(r)      = sum_l I_l(r)
///
/// The successive sum is carried through the pair-sum frames u_l = I_l + I_{l+1}:
///   successive = sum_l u_l(r) u_l(r+d) - 2 same + I_1(r) I_1(r+d) + I_N(r) I_N(r+d)
/// so both stored tables are symmetric and only half the window is kept.
class AccumulatorSet {
 public:
  AccumulatorSet() = default;
  AccumulatorSet(Grid grid, int window_radius);

  const Grid& grid() const { return grid_; }
  int window_radius() const { return window_radius_; }
  std::uint64_t frames_seen() const { return frames_seen_; }

  /// False when r + d leaves the grid or |d|_inf exceeds the window.
  bool has_partner(Pixel r, Offset d) const;

  std::uint64_t mean_sum(Pixel r) const { return mean_sum_[grid_.index(r)]; }
  std::uint64_t same(Pixel r, Offset d) const;
  std::uint64_t successive(Pixel r, Offset d) const;

 private:
  friend class Correlator;

  std::size_t slot(Pixel& r, Offset& d) const;  // canonicalizes (r, d)

  Grid grid_;
  int window_radius_ = 0;
  std::uint64_t frames_seen_ = 0;
  std::vector<Offset> offsets_;
  std::vector<int> offset_slot_;  // (2w+1)^2 lookup, -1 for the mirrored half
  std::vector<std::uint64_t> mean_sum_;
  std::vector<std::uint64_t> same_;      // [slot * P + pixel]
  std::vector<std::uint64_t> pair_sum_;  // sum of u_l(r) u_l(r+d)
  std::vector<std::uint16_t> first_frame_;
  std::vector<std::uint16_t> last_frame_;
};

/// Streaming accumulator. Frames must arrive in acquisition order.
///
/// Work is split over blocks of pixel rows, each owned by one thread. Products
/// are summed in double precision over blocks of at most 2^18 frames, where
/// every partial sum is an integer below 2^53 and therefore exact, then folded
/// into 64-bit integers. The result is bit-identical for any thread count.
class Correlator : public FrameSink {
 public:
  Correlator(Grid grid, int window_radius, unsigned threads = 1, std::size_t batch_frames = 32);

  void write(std::span<const std::uint16_t> frame) override;

  /// Flushes pending frames and returns the sums. The correlator can keep
  /// receiving frames afterwards.
  const AccumulatorSet& finish();

  std::uint64_t frames_seen() const { return acc_.frames_seen_; }

 private:
  void process_batch();
  void fold_block();

  AccumulatorSet acc_;
  unsigned threads_;
  std::size_t batch_capacity_;
  std::size_t tile_rows_;

  std::vector<double> same_batch_;  // frames as doubles, batch-major
  std::vector<double> pair_batch_;  // pair-sum frames
  std::size_t same_count_ = 0;
  std::size_t pair_count_ = 0;

  std::vector<double> block_same_;
  std::vector<double> block_pair_;
  std::uint64_t block_frames_ = 0;
};

/// Runs a whole in-memory stack through a Correlator.
AccumulatorSet accumulate(const FrameStack& stack, int window_radius, unsigned threads = 1);

/// Finalized intensity-correlation estimate over the offset window.
struct CorrelationResult {
  Grid grid;
  int window_radius = 0;
  std::uint64_t n_frames = 0;
  std::uint64_t source_hash = 0;
  ImageD mean;                 ///< <I(r)>
  ImageD diagonal;             ///< Gamma(r, r) by the neighbour rule
  std::vector<double> gamma;   ///< [offset_index(d) * P + pixel]; zero where r + d is off-grid

  int window_side() const { return 2 * window_radius + 1; }
  std::size_t offset_index(Offset d) const {
    return static_cast<std::size_t>((d.dy + window_radius) * window_side() + (d.dx + window_radius));
  }
  bool in_window(Offset d) const {
    return d.dx >= -window_radius && d.dx <= window_radius && d.dy >= -window_radius && d.dy <= window_radius;
  }
  double at(Pixel r, Offset d) const { return gamma[offset_index(d) * grid.size() + grid.index(r)]; }

  friend bool operator==(const CorrelationResult&, const CorrelationResult&) = default;
};

/// Offset used in place of the same-pixel term: the pixel to the left, or the
/// pixel to the right in column 0.
Offset diagonal_partner(Grid grid, Pixel r);

/// Gamma(r, r+d) = same(r, d) / N - successive(r, d) / (2 (N - 1)).
/// The d = 0 entry holds the neighbour-rule diagonal.
CorrelationResult finalize_gamma(const AccumulatorSet& acc);

/// Largest window radius for the dense mode (all pixel pairs kept). Only
/// offered for grids up to 32x32.
int full_window_radius(Grid grid);

struct MinusCoordinateMap {
  int radius = 0;
  std::vector<double> values;  ///< (2 radius + 1)^2, row-major in (dy, dx)

  int side() const { return 2 * radius + 1; }
  double at(Offset d) const {
    return values[static_cast<std::size_t>((d.dy + radius) * side() + (d.dx + radius))];
  }
};

/// P(d) = sum over r of Gamma(r, r + d), skipping pixels whose partner is off-grid.
MinusCoordinateMap minus_projection(const CorrelationResult& res);

struct ConditionalImage {
  Pixel anchor;
  ImageD image;             ///< zero outside the window around the anchor
  bool normalized = false;  ///< false when the window sum was <= 0
};

ConditionalImage conditional_projection(const CorrelationResult& res, Pixel anchor);

}  // namespace qdistill
