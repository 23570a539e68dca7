#include "qdistill/correlator.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "qdistill/error.hpp"
#include "qdistill/parallel.hpp"

namespace qdistill {

namespace {

// Partial sums stay below 2^53 for (2^17 - 2)^2 * 2^18 < 2^52.
constexpr std::uint64_t kExactBlockFrames = std::uint64_t{1} << 18;

constexpr int kLanes = 8;
constexpr int kGroup = 4;
using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));

// Batched frames are zero-padded rows of `stride` doubles, pixel x stored at
// column pad + x, so partners that fall off the grid read zeros.
struct BatchLayout {
  int pad = 0;
  std::size_t stride = 0;
  std::size_t frame = 0;  // doubles per padded frame

  BatchLayout() = default;
  BatchLayout(Grid grid, int w) : pad(w) {
    const std::size_t lanes = (static_cast<std::size_t>(grid.width) + kLanes - 1) / kLanes * kLanes;
    stride = lanes + 2 * static_cast<std::size_t>(w);
    frame = stride * static_cast<std::size_t>(grid.height);
  }
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(pad + x); }
};

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// Slot of offset (dx, dy) in half_window order.
inline std::size_t half_slot(int dx, int dy, int w) {
  return dy == 0 ? static_cast<std::size_t>(dx)
                 : static_cast<std::size_t>(w + 1 + (dy - 1) * (2 * w + 1) + (dx + w));
}

// For each lane chunk of a row, a group of dx offsets keeps its accumulators
// in registers across the whole batch.
void accumulate_tile(double* __restrict block, const double* __restrict frames, std::size_t count, const Grid& grid,
                     const BatchLayout& layout, int w, int y0, int y1) {
  const std::size_t P = grid.size();
  const int W = grid.width;
  const int H = grid.height;
  for (int y = y0; y < y1; ++y) {
    for (int dy = 0; dy <= w && y + dy < H; ++dy) {
      const int dx_first = dy == 0 ? 0 : -w;
      for (int x0 = 0; x0 < W; x0 += kLanes) {
        const int lanes = std::min(kLanes, W - x0);
        for (int g0 = dx_first; g0 <= w; g0 += kGroup) {
          const int group = std::min(kGroup, w - g0 + 1);
          Vec t[kGroup] = {};
          const double* row_a = frames + layout.at(x0, y);
          const double* row_c = frames + layout.at(x0 + g0, y + dy);
          if (group == kGroup) {
            for (std::size_t b = 0; b < count; ++b) {
              const Vec a = load(row_a + b * layout.frame);
              const double* c = row_c + b * layout.frame;
              for (int i = 0; i < kGroup; ++i) t[i] += a * load(c + i);
            }
          } else {
            for (std::size_t b = 0; b < count; ++b) {
              const Vec a = load(row_a + b * layout.frame);
              const double* c = row_c + b * layout.frame;
              for (int i = 0; i < group; ++i) t[i] += a * load(c + i);
            }
          }
          for (int i = 0; i < group; ++i) {
            double* acc = block + half_slot(g0 + i, dy, w) * P + static_cast<std::size_t>(y) * W + x0;
            for (int j = 0; j < lanes; ++j) acc[j] += t[i][j];
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<Offset> half_window(int window_radius) {
  std::vector<Offset> out;
  for (int dx = 0; dx <= window_radius; ++dx) out.push_back({dx, 0});
  for (int dy = 1; dy <= window_radius; ++dy) {
    for (int dx = -window_radius; dx <= window_radius; ++dx) out.push_back({dx, dy});
  }
  return out;
}

// ------------------------------------------------------------ AccumulatorSet

AccumulatorSet::AccumulatorSet(Grid grid, int window_radius)
    : grid_(grid), window_radius_(window_radius), offsets_(half_window(window_radius)) {
  if (!grid.valid()) throw ConfigError("correlator needs a non-empty grid");
  if (window_radius < 1) throw ConfigError("window radius must be >= 1");
  const int side = 2 * window_radius + 1;
  offset_slot_.assign(static_cast<std::size_t>(side) * side, -1);
  for (std::size_t k = 0; k < offsets_.size(); ++k) {
    const Offset d = offsets_[k];
    offset_slot_[static_cast<std::size_t>((d.dy + window_radius) * side + (d.dx + window_radius))] =
        static_cast<int>(k);
  }
  const std::size_t P = grid.size();
  mean_sum_.assign(P, 0);
  same_.assign(offsets_.size() * P, 0);
  pair_sum_.assign(offsets_.size() * P, 0);
  first_frame_.assign(P, 0);
  last_frame_.assign(P, 0);
}

bool AccumulatorSet::has_partner(Pixel r, Offset d) const {
  if (std::abs(d.dx) > window_radius_ || std::abs(d.dy) > window_radius_) return false;
  return grid_.contains(r) && grid_.contains(r.x + d.dx, r.y + d.dy);
}

std::size_t AccumulatorSet::slot(Pixel& r, Offset& d) const {
  const int side = 2 * window_radius_ + 1;
  int s = offset_slot_[static_cast<std::size_t>((d.dy + window_radius_) * side + (d.dx + window_radius_))];
  if (s < 0) {
    r = Pixel{r.x + d.dx, r.y + d.dy};
    d = Offset{-d.dx, -d.dy};
    s = offset_slot_[static_cast<std::size_t>((d.dy + window_radius_) * side + (d.dx + window_radius_))];
  }
  return static_cast<std::size_t>(s);
}

std::uint64_t AccumulatorSet::same(Pixel r, Offset d) const {
  if (!has_partner(r, d)) return 0;
  const std::size_t k = slot(r, d);
  return same_[k * grid_.size() + grid_.index(r)];
}

std::uint64_t AccumulatorSet::successive(Pixel r, Offset d) const {
  if (!has_partner(r, d)) return 0;
  const std::size_t k = slot(r, d);
  const std::size_t i = grid_.index(r);
  const std::size_t j = grid_.index(r.x + d.dx, r.y + d.dy);
  const std::uint64_t ends = std::uint64_t{first_frame_[i]} * first_frame_[j] +
                             std::uint64_t{last_frame_[i]} * last_frame_[j];
  // Never negative: pair_sum = 2 same - ends + successive.
  return pair_sum_[k * grid_.size() + i] + ends - 2 * same_[k * grid_.size() + i];
}

// ---------------------------------------------------------------- Correlator

Correlator::Correlator(Grid grid, int window_radius, unsigned threads, std::size_t batch_frames)
    : acc_(grid, window_radius), threads_(std::max(1u, threads)), batch_capacity_(std::max<std::size_t>(1, batch_frames)) {
  const std::size_t P = grid.size();
  const std::size_t K = acc_.offsets_.size();
  const BatchLayout layout(grid, window_radius);
  same_batch_.assign(batch_capacity_ * layout.frame, 0.0);
  pair_batch_.assign(batch_capacity_ * layout.frame, 0.0);
  block_same_.assign(K * P, 0.0);
  block_pair_.assign(K * P, 0.0);
  // Keep a tile's two block accumulators around 512 KiB, and give every thread a tile.
  const std::size_t per_row = static_cast<std::size_t>(grid.width) * K * 16;
  std::size_t rows = std::max<std::size_t>(1, (512u * 1024u) / std::max<std::size_t>(1, per_row));
  const std::size_t fair = (static_cast<std::size_t>(grid.height) + threads_ - 1) / threads_;
  tile_rows_ = std::clamp<std::size_t>(std::min(rows, fair), 1, static_cast<std::size_t>(grid.height));
}

void Correlator::write(std::span<const std::uint16_t> frame) {
  const std::size_t P = acc_.grid_.size();
  if (frame.size() != P) {
    throw CorruptStackError("frame has " + std::to_string(frame.size()) + " pixels, expected " + std::to_string(P),
                            acc_.frames_seen_);
  }
  const Grid& grid = acc_.grid_;
  const BatchLayout layout(grid, acc_.window_radius_);
  double* same_row = same_batch_.data() + same_count_ * layout.frame;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.index(x, y);
      same_row[layout.at(x, y)] = frame[i];
      acc_.mean_sum_[i] += frame[i];
    }
  }
  ++same_count_;
  if (acc_.frames_seen_ == 0) {
    std::copy(frame.begin(), frame.end(), acc_.first_frame_.begin());
  } else {
    double* pair_row = pair_batch_.data() + pair_count_ * layout.frame;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const std::size_t i = grid.index(x, y);
        pair_row[layout.at(x, y)] = static_cast<double>(acc_.last_frame_[i]) + frame[i];
      }
    }
    ++pair_count_;
  }
  std::copy(frame.begin(), frame.end(), acc_.last_frame_.begin());
  ++acc_.frames_seen_;
  if (same_count_ == batch_capacity_ || pair_count_ == batch_capacity_) process_batch();
}

void Correlator::process_batch() {
  const std::size_t pending = std::max(same_count_, pair_count_);
  if (pending == 0) return;
  if (block_frames_ + pending > kExactBlockFrames) fold_block();
  const Grid& grid = acc_.grid_;
  const int w = acc_.window_radius_;
  const BatchLayout layout(grid, w);
  const std::size_t tiles = (static_cast<std::size_t>(grid.height) + tile_rows_ - 1) / tile_rows_;
  parallel_for(tiles, threads_, [&](std::size_t t) {
    const int y0 = static_cast<int>(t * tile_rows_);
    const int y1 = std::min(grid.height, static_cast<int>((t + 1) * tile_rows_));
    accumulate_tile(block_same_.data(), same_batch_.data(), same_count_, grid, layout, w, y0, y1);
    accumulate_tile(block_pair_.data(), pair_batch_.data(), pair_count_, grid, layout, w, y0, y1);
  });
  block_frames_ += pending;
  same_count_ = 0;
  pair_count_ = 0;
}

void Correlator::fold_block() {
  for (std::size_t i = 0; i < block_same_.size(); ++i) {
    acc_.same_[i] += static_cast<std::uint64_t>(block_same_[i]);
    acc_.pair_sum_[i] += static_cast<std::uint64_t>(block_pair_[i]);
  }
  std::fill(block_same_.begin(), block_same_.end(), 0.0);
  std::fill(block_pair_.begin(), block_pair_.end(), 0.0);
  block_frames_ = 0;
}

const AccumulatorSet& Correlator::finish() {
  process_batch();
  fold_block();
  return acc_;
}

AccumulatorSet accumulate(const FrameStack& stack, int window_radius, unsigned threads) {
  Correlator correlator(stack.info.grid, window_radius, threads);
  for (std::uint64_t l = 0; l < stack.info.n_frames; ++l) correlator.write(stack.frame(l));
  return correlator.finish();
}

// ------------------------------------------------------------- finalize

Offset diagonal_partner(Grid grid, Pixel r) {
  if (r.x >= 1) return {-1, 0};
  if (grid.width >= 2) return {1, 0};
  if (r.y >= 1) return {0, -1};
  if (grid.height >= 2) return {0, 1};
  return {0, 0};
}

CorrelationResult finalize_gamma(const AccumulatorSet& acc) {
  const std::uint64_t N = acc.frames_seen();
  if (N < 2) throw DataError("correlation needs at least 2 frames, got " + std::to_string(N));
  const Grid grid = acc.grid();
  const int w = acc.window_radius();
  const std::size_t P = grid.size();

  CorrelationResult res;
  res.grid = grid;
  res.window_radius = w;
  res.n_frames = N;
  res.mean = ImageD(grid, 0.0);
  res.diagonal = ImageD(grid, 0.0);
  res.gamma.assign(static_cast<std::size_t>(res.window_side()) * res.window_side() * P, 0.0);

  // Divisions rather than reciprocal products keep exact cases exact
  // (a constant stack gives Gamma = 0 to the last bit).
  const long double n = static_cast<long double>(N);
  const long double n_succ = 2.0L * static_cast<long double>(N - 1);
  auto estimate = [&](Pixel r, Offset d) {
    const long double s = static_cast<long double>(acc.same(r, d)) / n;
    const long double t = static_cast<long double>(acc.successive(r, d)) / n_succ;
    return static_cast<double>(s - t);
  };

  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const Pixel r{x, y};
      res.mean(x, y) = static_cast<double>(static_cast<long double>(acc.mean_sum(r)) / n);
      for (int dy = -w; dy <= w; ++dy) {
        for (int dx = -w; dx <= w; ++dx) {
          const Offset d{dx, dy};
          if ((dx == 0 && dy == 0) || !acc.has_partner(r, d)) continue;
          res.gamma[res.offset_index(d) * P + grid.index(r)] = estimate(r, d);
        }
      }
    }
  }
  const std::size_t centre = res.offset_index({0, 0}) * P;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const Offset d = diagonal_partner(grid, {x, y});
      const double v = (d == Offset{0, 0}) ? 0.0 : res.at({x, y}, d);
      res.diagonal(x, y) = v;
      res.gamma[centre + grid.index(x, y)] = v;
    }
  }
  return res;
}

int full_window_radius(Grid grid) {
  if (grid.width > 32 || grid.height > 32) throw ConfigError("dense correlation is limited to 32x32 grids");
  return std::max(1, std::max(grid.width, grid.height) - 1);
}

// ------------------------------------------------------------ projections

MinusCoordinateMap minus_projection(const CorrelationResult& res) {
  MinusCoordinateMap map;
  map.radius = res.window_radius;
  map.values.assign(static_cast<std::size_t>(map.side()) * map.side(), 0.0);
  const std::size_t P = res.grid.size();
  for (int dy = -map.radius; dy <= map.radius; ++dy) {
    for (int dx = -map.radius; dx <= map.radius; ++dx) {
      // Off-grid partners were stored as zero, so a plain sum truncates.
      const double* g = res.gamma.data() + res.offset_index({dx, dy}) * P;
      long double sum = 0.0L;
      for (std::size_t i = 0; i < P; ++i) sum += g[i];
      map.values[static_cast<std::size_t>((dy + map.radius) * map.side() + (dx + map.radius))] =
          static_cast<double>(sum);
    }
  }
  return map;
}

ConditionalImage conditional_projection(const CorrelationResult& res, Pixel anchor) {
  if (!res.grid.contains(anchor)) throw ConfigError("conditional anchor outside the grid");
  ConditionalImage out;
  out.anchor = anchor;
  out.image = ImageD(res.grid, 0.0);
  const int w = res.window_radius;
  long double sum = 0.0L;
  for (int dy = -w; dy <= w; ++dy) {
    for (int dx = -w; dx <= w; ++dx) {
      const int x = anchor.x + dx;
      const int y = anchor.y + dy;
      if (!res.grid.contains(x, y)) continue;
      // Gamma(r, A) = Gamma(A, r); the window is stored around A.
      const double v = res.at(anchor, {dx, dy});
      out.image(x, y) = v;
      sum += v;
    }
  }
  if (sum > 0.0L) {
    const double norm = static_cast<double>(sum);
    for (double& v : out.image.data()) v /= norm;
    out.normalized = true;
  }
  return out;
}

}  // namespace qdistill
