#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fpx {

// Row-major 2-D grid with bounds-checked construction.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw std::invalid_argument("grid data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  // Value at (x, y), or `outside` when the coordinate is off the grid.
  T value_or(int x, int y, T outside) const noexcept {
    return contains(x, y) ? (*this)(x, y) : outside;
  }

  // Value at the nearest in-bounds coordinate (replicated border).
  const T& clamped(int x, int y) const noexcept {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<T> pixels() & noexcept { return data_; }
  std::span<const T> pixels() const& noexcept { return data_; }
  // A span into a temporary would dangle.
  std::span<T> pixels() && = delete;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("grid dimensions must be positive");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

inline constexpr int kDefaultDpi = 500;

/// 8-bit grayscale image. Intensities are raw file values; `dpi` is metadata
/// only and never triggers resampling.
class GrayImage : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;

  int dpi = kDefaultDpi;
};

/// Ridge bitmap: 1 = ridge, 0 = background.
class BinaryImage : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;
};

/// One-pixel-wide ridge bitmap produced by thinning.
class Skeleton : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;

  Skeleton() = default;
  explicit Skeleton(const Grid<std::uint8_t>& bits) : Grid(bits) {}
};

/// Real-valued intensities after mean/variance normalization.
class NormalizedImage : public Grid<double> {
 public:
  using Grid::Grid;
};

inline constexpr double kDefaultTargetMean = 100.0;
inline constexpr double kDefaultTargetVariance = 100.0;

/// Maps the image to the requested mean and variance with a single
/// sign-preserving affine map. A constant image maps to `target_mean`.
inline NormalizedImage normalize(const GrayImage& img,
                                 double target_mean = kDefaultTargetMean,
                                 double target_variance = kDefaultTargetVariance) {
  if (!(target_variance > 0.0)) {
    throw std::invalid_argument("normalize: target variance must be positive");
  }
  const auto px = img.pixels();
  double sum = 0.0;
  for (auto v : px) sum += v;
  const double mean = sum / static_cast<double>(px.size());
  double ss = 0.0;
  for (auto v : px) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(px.size());

  NormalizedImage out(img.width(), img.height(), target_mean);
  if (variance <= 0.0) return out;

  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double d = px[i] - mean;
    const double dev = std::sqrt(target_variance * d * d / variance);
    dst[i] = d > 0.0 ? target_mean + dev : target_mean - dev;
  }
  return out;
}

/// 255 - v for every pixel.
inline GrayImage invert(const GrayImage& img) {
  GrayImage out = img;
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

}  // namespace fpx
