#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qdistill/error.hpp"

namespace qdistill {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Displacement between two pixels, in whole pixels.
struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct Grid {
  int width = 0;
  int height = 0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool contains(Pixel p) const { return contains(p.x, p.y); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  std::size_t index(Pixel p) const { return index(p.x, p.y); }
  bool valid() const { return width > 0 && height > 0; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Row-major 2-D raster over a Grid.
template <class T>
class Image {
 public:
  Image() = default;
  explicit Image(Grid grid, T fill = T{}) : grid_(grid), data_(grid.size(), fill) {}
  Image(Grid grid, std::vector<T> data) : grid_(grid), data_(std::move(data)) {
    if (data_.size() != grid_.size()) throw ConfigError("image data does not match grid size");
  }

  const Grid& grid() const { return grid_; }
  int width() const { return grid_.width; }
  int height() const { return grid_.height; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[grid_.index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[grid_.index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Grid grid_;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using CountImage = Image<std::int32_t>;
using GrayFrame = Image<std::uint16_t>;

}  // namespace qdistill
