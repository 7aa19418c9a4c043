#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fpx/image.hpp"

namespace fpx {

/// Block tiling shared by every per-block map. Edge blocks may be partial.
struct BlockGeometry {
  int block_size = 16;
  int cols = 0;
  int rows = 0;
  int width = 0;
  int height = 0;

  static BlockGeometry of(int width, int height, int block_size) {
    return {block_size, (width + block_size - 1) / block_size,
            (height + block_size - 1) / block_size, width, height};
  }

  int x0(int col) const { return col * block_size; }
  int y0(int row) const { return row * block_size; }
  int x1(int col) const { return std::min(width, (col + 1) * block_size); }
  int y1(int row) const { return std::min(height, (row + 1) * block_size); }
  double center_x(int col) const { return 0.5 * (x0(col) + x1(col) - 1); }
  double center_y(int row) const { return 0.5 * (y0(row) + y1(row) - 1); }
  int col_of(int x) const { return x / block_size; }
  int row_of(int y) const { return y / block_size; }
  int count() const { return cols * rows; }

  // Blocks not touching the image border.
  bool interior(int col, int row) const {
    return col > 0 && row > 0 && col < cols - 1 && row < rows - 1;
  }

  friend bool operator==(const BlockGeometry&, const BlockGeometry&) = default;
};

/// Per-block ridge direction in [0, pi), plus gradient coherence in [0, 1].
struct OrientationField {
  BlockGeometry geometry;
  Grid<double> theta;
  Grid<double> coherence;
};

struct FrequencyMap {
  BlockGeometry geometry;
  Grid<std::optional<double>> freq;  // cycles per pixel
};

enum class BlockLabel : std::uint8_t { unrecoverable = 0, recoverable = 1 };

struct RegionMask {
  BlockGeometry geometry;
  Grid<BlockLabel> label;
  double recoverable_fraction = 0.0;

  bool recoverable(int col, int row) const { return label(col, row) == BlockLabel::recoverable; }
  bool recoverable_pixel(int x, int y) const {
    return recoverable(geometry.col_of(x), geometry.row_of(y));
  }
};

/// The image had too few recoverable blocks to be enhanced.
struct Rejection {
  double recoverable_fraction = 0.0;
  double threshold = 0.0;
};

using MaskOutcome = std::variant<RegionMask, Rejection>;

inline constexpr int kDefaultBlockSize = 16;
inline constexpr double kDefaultSmoothSigma = 1.0;
inline constexpr int kDefaultFrequencyWindow = 32;
inline constexpr double kMinRidgePeriod = 3.0;
inline constexpr double kMaxRidgePeriod = 25.0;
inline constexpr int kFrequencyFillPasses = 3;

struct MaskParams {
  double reject_threshold = 0.25;
  double coherence_floor = 0.3;
  double variance_floor = 10.0;
};

struct GaborParams {
  double sigma_x = 4.0;  // across ridges
  double sigma_y = 4.0;  // along ridges
};

namespace detail {

inline double fold_half_turn(double angle) {
  double a = std::fmod(angle, std::numbers::pi);
  if (a < 0.0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a = 0.0;
  return a;
}

inline double bilinear(const Grid<double>& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int ix = static_cast<int>(fx);
  const int iy = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double top = (1.0 - ax) * img.clamped(ix, iy) + ax * img.clamped(ix + 1, iy);
  const double bottom = (1.0 - ax) * img.clamped(ix, iy + 1) + ax * img.clamped(ix + 1, iy + 1);
  return (1.0 - ay) * top + ay * bottom;
}

// Gaussian low-pass over a block grid; weights renormalized at the edges.
inline Grid<double> smooth_blocks(const Grid<double>& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) w[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

  Grid<double> out(in.width(), in.height(), 0.0);
  for (int r = 0; r < in.height(); ++r) {
    for (int c = 0; c < in.width(); ++c) {
      double acc = 0.0;
      double norm = 0.0;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          if (!in.contains(c + dc, r + dr)) continue;
          const double k = w[dr + radius] * w[dc + radius];
          acc += k * in(c + dc, r + dr);
          norm += k;
        }
      }
      out(c, r) = acc / norm;
    }
  }
  return out;
}

}  // namespace detail

/// Least-mean-square block orientation from Sobel gradients, averaged in the
/// doubled-angle domain and Gaussian-smoothed over `smooth_sigma` blocks.
inline OrientationField estimate_orientation(const NormalizedImage& img,
                                             int block_size = kDefaultBlockSize,
                                             double smooth_sigma = kDefaultSmoothSigma) {
  if (block_size < 4) throw std::invalid_argument("estimate_orientation: block size must be >= 4");
  if (img.width() < block_size || img.height() < block_size) {
    throw std::invalid_argument("estimate_orientation: image smaller than one block");
  }
  const auto geo = BlockGeometry::of(img.width(), img.height(), block_size);

  Grid<double> vx(geo.cols, geo.rows, 0.0);      // sum 2 Gx Gy
  Grid<double> vy(geo.cols, geo.rows, 0.0);      // sum Gx^2 - Gy^2
  Grid<double> energy(geo.cols, geo.rows, 0.0);  // sum Gx^2 + Gy^2

  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      double sx = 0.0, sy = 0.0, se = 0.0;
      for (int y = geo.y0(r); y < geo.y1(r); ++y) {
        for (int x = geo.x0(c); x < geo.x1(c); ++x) {
          const double gx = (img.clamped(x + 1, y - 1) + 2.0 * img.clamped(x + 1, y) +
                             img.clamped(x + 1, y + 1)) -
                            (img.clamped(x - 1, y - 1) + 2.0 * img.clamped(x - 1, y) +
                             img.clamped(x - 1, y + 1));
          const double gy = (img.clamped(x - 1, y + 1) + 2.0 * img.clamped(x, y + 1) +
                             img.clamped(x + 1, y + 1)) -
                            (img.clamped(x - 1, y - 1) + 2.0 * img.clamped(x, y - 1) +
                             img.clamped(x + 1, y - 1));
          sx += 2.0 * gx * gy;
          sy += gx * gx - gy * gy;
          se += gx * gx + gy * gy;
        }
      }
      vx(c, r) = sx;
      vy(c, r) = sy;
      energy(c, r) = se;
    }
  }

  const auto svx = detail::smooth_blocks(vx, smooth_sigma);
  const auto svy = detail::smooth_blocks(vy, smooth_sigma);
  const auto sen = detail::smooth_blocks(energy, smooth_sigma);

  OrientationField field{geo, Grid<double>(geo.cols, geo.rows, 0.0),
                         Grid<double>(geo.cols, geo.rows, 0.0)};
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      // Ridges run perpendicular to the dominant gradient.
      field.theta(c, r) =
          detail::fold_half_turn(0.5 * std::atan2(svx(c, r), svy(c, r)) + std::numbers::pi / 2);
      const double e = sen(c, r);
      field.coherence(c, r) = e > 0.0 ? std::min(1.0, std::hypot(svx(c, r), svy(c, r)) / e) : 0.0;
    }
  }
  return field;
}

/// Ridge period from the oriented projection ("x-signature") centered on a
/// point; nullopt when no valid periodicity is found.
inline std::optional<double> signature_period(const NormalizedImage& img, double cx, double cy,
                                              double theta, int window, int length) {
  const double tx = std::cos(theta), ty = std::sin(theta);  // along ridge
  const double nx = -ty, ny = tx;                            // across ridges
  std::vector<double> sig(window, 0.0);
  for (int k = 0; k < window; ++k) {
    const double t = k - 0.5 * (window - 1);
    double acc = 0.0;
    for (int d = 0; d < length; ++d) {
      const double s = d - 0.5 * (length - 1);
      acc += detail::bilinear(img, cx + s * tx + t * nx, cy + s * ty + t * ny);
    }
    sig[k] = acc / length;
  }

  std::vector<double> smooth(window);
  for (int k = 0; k < window; ++k) {
    const double l = sig[std::max(k - 1, 0)];
    const double r = sig[std::min(k + 1, window - 1)];
    smooth[k] = 0.25 * l + 0.5 * sig[k] + 0.25 * r;
  }
  const auto [lo, hi] = std::minmax_element(smooth.begin(), smooth.end());
  if (*hi - *lo < 1e-6) return std::nullopt;

  std::vector<double> peaks;
  for (int k = 1; k + 1 < window; ++k) {
    if (smooth[k] > smooth[k - 1] && smooth[k] >= smooth[k + 1]) {
      const double denom = smooth[k - 1] - 2.0 * smooth[k] + smooth[k + 1];
      double offset = denom < 0.0 ? 0.5 * (smooth[k - 1] - smooth[k + 1]) / denom : 0.0;
      offset = std::clamp(offset, -0.5, 0.5);
      peaks.push_back(k + offset);
    }
  }
  if (peaks.size() < 2) return std::nullopt;
  const double period = (peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
  if (period < kMinRidgePeriod || period > kMaxRidgePeriod) return std::nullopt;
  return period;
}

/// Per-block ridge frequency from peak spacing of the oriented projection.
/// Missing blocks are filled from present 3x3 neighbours for a few passes.
inline FrequencyMap estimate_frequency(const NormalizedImage& img, const OrientationField& orient,
                                       int window = kDefaultFrequencyWindow) {
  const auto& geo = orient.geometry;
  if (geo.width != img.width() || geo.height != img.height()) {
    throw std::invalid_argument("estimate_frequency: orientation field does not cover the image");
  }
  if (window < 3) throw std::invalid_argument("estimate_frequency: window must be >= 3");

  FrequencyMap map{geo, Grid<std::optional<double>>(geo.cols, geo.rows)};
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      const auto period = signature_period(img, geo.center_x(c), geo.center_y(r),
                                           orient.theta(c, r), window, geo.block_size);
      if (period) map.freq(c, r) = 1.0 / *period;
    }
  }

  for (int pass = 0; pass < kFrequencyFillPasses; ++pass) {
    auto next = map.freq;
    bool changed = false;
    for (int r = 0; r < geo.rows; ++r) {
      for (int c = 0; c < geo.cols; ++c) {
        if (map.freq(c, r)) continue;
        double acc = 0.0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (!map.freq.contains(c + dc, r + dr)) continue;
            if (const auto& f = map.freq(c + dc, r + dr)) {
              acc += *f;
              ++n;
            }
          }
        }
        if (n > 0) {
          next(c, r) = acc / n;
          changed = true;
        }
      }
    }
    map.freq = std::move(next);
    if (!changed) break;
  }
  return map;
}

/// Labels blocks recoverable when they have contrast, coherent orientation
/// and a ridge frequency. Returns a Rejection when the recoverable fraction
/// falls below `params.reject_threshold`.
inline MaskOutcome compute_region_mask(const NormalizedImage& img, const OrientationField& orient,
                                       const FrequencyMap& freq, const MaskParams& params = {}) {
  if (!(params.reject_threshold >= 0.0 && params.reject_threshold <= 1.0)) {
    throw std::invalid_argument("compute_region_mask: reject threshold must be in [0, 1]");
  }
  const auto& geo = orient.geometry;
  if (!(geo == freq.geometry) || geo.width != img.width() || geo.height != img.height()) {
    throw std::invalid_argument("compute_region_mask: block geometry mismatch");
  }

  RegionMask mask{geo, Grid<BlockLabel>(geo.cols, geo.rows, BlockLabel::unrecoverable), 0.0};
  int recoverable = 0;
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      double sum = 0.0, sq = 0.0;
      int n = 0;
      for (int y = geo.y0(r); y < geo.y1(r); ++y) {
        for (int x = geo.x0(c); x < geo.x1(c); ++x) {
          sum += img(x, y);
          sq += img(x, y) * img(x, y);
          ++n;
        }
      }
      const double mean = sum / n;
      const double variance = std::max(0.0, sq / n - mean * mean);
      const bool ok = variance >= params.variance_floor &&
                      orient.coherence(c, r) >= params.coherence_floor &&
                      freq.freq(c, r).has_value();
      if (ok) {
        mask.label(c, r) = BlockLabel::recoverable;
        ++recoverable;
      }
    }
  }
  mask.recoverable_fraction = static_cast<double>(recoverable) / geo.count();
  if (mask.recoverable_fraction < params.reject_threshold) {
    return Rejection{mask.recoverable_fraction, params.reject_threshold};
  }
  return mask;
}

/// Even-symmetric, zero-DC Gabor kernel. `theta` is the ridge direction.
struct GaborKernel {
  int half_width = 0;
  std::vector<double> weights;  // (2h+1)^2, row-major

  double operator()(int dx, int dy) const {
    const int side = 2 * half_width + 1;
    return weights[static_cast<std::size_t>(dy + half_width) * side + (dx + half_width)];
  }
};

inline GaborKernel make_gabor_kernel(double theta, double freq, const GaborParams& params) {
  const int h = static_cast<int>(std::ceil(3.0 * std::max(params.sigma_x, params.sigma_y)));
  const int side = 2 * h + 1;
  const double st = std::sin(theta), ct = std::cos(theta);
  std::vector<double> envelope(static_cast<std::size_t>(side) * side);
  GaborKernel k{h, std::vector<double>(envelope.size())};
  double gsum = 0.0, esum = 0.0;
  for (int dy = -h; dy <= h; ++dy) {
    for (int dx = -h; dx <= h; ++dx) {
      const double across = -dx * st + dy * ct;
      const double along = dx * ct + dy * st;
      const double env = std::exp(-0.5 * (across * across / (params.sigma_x * params.sigma_x) +
                                          along * along / (params.sigma_y * params.sigma_y)));
      const auto i = static_cast<std::size_t>(dy + h) * side + (dx + h);
      envelope[i] = env;
      k.weights[i] = env * std::cos(2.0 * std::numbers::pi * freq * across);
      gsum += k.weights[i];
      esum += env;
    }
  }
  const double dc = gsum / esum;
  for (std::size_t i = 0; i < envelope.size(); ++i) k.weights[i] -= dc * envelope[i];
  return k;
}

/// Signed Gabor response at every recoverable pixel (0 elsewhere), using the
/// kernel tuned to the pixel's block. Kernels are cached on (theta rounded to
/// 1 degree, freq rounded to 1e-3), so at most one kernel per block exists.
struct GaborResponse {
  Grid<double> value;
  Grid<std::uint8_t> filtered;  // 1 where a kernel was applied
  double flat_level = 0.0;      // |response| at or below this is rounding noise
};

inline GaborResponse gabor_response(const NormalizedImage& img, const OrientationField& orient,
                                    const FrequencyMap& freq, const RegionMask& mask,
                                    const GaborParams& params = {}) {
  const auto& geo = orient.geometry;
  if (!(geo == freq.geometry) || !(geo == mask.geometry) || geo.width != img.width() ||
      geo.height != img.height()) {
    throw std::invalid_argument("gabor_enhance: block geometry mismatch");
  }
  if (!(params.sigma_x > 0.0 && params.sigma_y > 0.0)) {
    throw std::invalid_argument("gabor_enhance: sigmas must be positive");
  }

  std::map<std::pair<int, int>, GaborKernel> cache;
  Grid<const GaborKernel*> block_kernel(geo.cols, geo.rows, nullptr);
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!mask.recoverable(c, r)) continue;
      const auto& f = freq.freq(c, r);
      if (!f) {
        throw std::logic_error("gabor_enhance: recoverable block (" + std::to_string(c) + ", " +
                               std::to_string(r) + ") has no ridge frequency");
      }
      const int deg = static_cast<int>(std::lround(orient.theta(c, r) * 180.0 / std::numbers::pi)) % 180;
      const int milli = static_cast<int>(std::lround(*f * 1000.0));
      auto it = cache.find({deg, milli});
      if (it == cache.end()) {
        it = cache
                 .emplace(std::pair{deg, milli},
                          make_gabor_kernel(deg * std::numbers::pi / 180.0, milli / 1000.0, params))
                 .first;
      }
      block_kernel(c, r) = &it->second;
    }
  }

  double kernel_l1 = 0.0;
  for (const auto& [key, k] : cache) {
    double l1 = 0.0;
    for (double w : k.weights) l1 += std::abs(w);
    kernel_l1 = std::max(kernel_l1, l1);
  }
  double input_peak = 0.0;
  for (double v : img.pixels()) input_peak = std::max(input_peak, std::abs(v));

  GaborResponse out{Grid<double>(img.width(), img.height(), 0.0),
                    Grid<std::uint8_t>(img.width(), img.height(), 0),
                    1e-9 * kernel_l1 * std::max(1.0, input_peak)};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const GaborKernel* k = block_kernel(geo.col_of(x), geo.row_of(y));
      if (!k) continue;
      const int h = k->half_width;
      double acc = 0.0;
      for (int dy = -h; dy <= h; ++dy) {
        for (int dx = -h; dx <= h; ++dx) acc += (*k)(dx, dy) * img.clamped(x + dx, y + dy);
      }
      out.value(x, y) = acc;
      out.filtered(x, y) = 1;
    }
  }
  return out;
}

inline constexpr std::uint8_t kEnhancedBackground = 255;

/// Gabor-filtered image: the response scaled symmetrically about mid-gray by
/// its peak magnitude; unrecoverable pixels set to `kEnhancedBackground`.
/// A flat (DC-only) input maps to mid-gray.
inline GrayImage gabor_enhance(const NormalizedImage& img, const OrientationField& orient,
                               const FrequencyMap& freq, const RegionMask& mask,
                               const GaborParams& params = {}) {
  const auto resp = gabor_response(img, orient, freq, mask, params);
  double peak = 0.0;
  for (double v : resp.value.pixels()) peak = std::max(peak, std::abs(v));
  const bool flat = peak <= resp.flat_level;

  GrayImage out(img.width(), img.height(), kEnhancedBackground);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!resp.filtered(x, y)) continue;
      const double v = flat ? 127.5 : 127.5 + 127.5 * resp.value(x, y) / peak;
      out(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

// Debug dumps.

inline void write_orientation_grid(std::ostream& os, const OrientationField& field) {
  os << std::fixed << std::setprecision(1);
  for (int r = 0; r < field.geometry.rows; ++r) {
    for (int c = 0; c < field.geometry.cols; ++c) {
      if (c) os << ' ';
      os << field.theta(c, r) * 180.0 / std::numbers::pi;
    }
    os << '\n';
  }
}

inline void write_frequency_grid(std::ostream& os, const FrequencyMap& map) {
  os << std::fixed << std::setprecision(4);
  for (int r = 0; r < map.geometry.rows; ++r) {
    for (int c = 0; c < map.geometry.cols; ++c) {
      if (c) os << ' ';
      if (const auto& f = map.freq(c, r)) {
        os << *f;
      } else {
        os << '-';
      }
    }
    os << '\n';
  }
}

/// Pixel-resolution view of the mask: recoverable = 255.
inline GrayImage mask_image(const RegionMask& mask) {
  GrayImage out(mask.geometry.width, mask.geometry.height, 0);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (mask.recoverable_pixel(x, y)) out(x, y) = 255;
    }
  }
  return out;
}

}  // namespace fpx
