#pragma once

// Test-only reference computations. Each one is written independently of
// the library code path it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "fpx/image.hpp"

namespace fpx::oracle {

// Number of 8-connected foreground components, by explicit stack flood fill.
inline int count_components8(const Grid<std::uint8_t>& img) {
  const int w = img.width(), h = img.height();
  std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
  int components = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!img(x, y) || seen[y * w + x]) continue;
      ++components;
      stack.push_back({x, y});
      seen[y * w + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!img(nx, ny) || seen[ny * w + nx]) continue;
            seen[ny * w + nx] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return components;
}

inline bool has_full_2x2(const Grid<std::uint8_t>& img) {
  for (int y = 0; y + 1 < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      if (img(x, y) && img(x + 1, y) && img(x, y + 1) && img(x + 1, y + 1)) return true;
    }
  }
  return false;
}

// Dark-ridge sinusoid: intensity varies along direction `wave_deg` with the
// given period. Ridges run perpendicular to `wave_deg`.
inline GrayImage stripes(int w, int h, double wave_deg, double period, double amplitude = 100.0,
                         double phase = 0.0) {
  GrayImage img(w, h, 0);
  const double a = wave_deg * std::numbers::pi / 180.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = (x * std::cos(a) + y * std::sin(a)) * 2.0 * std::numbers::pi / period + phase;
      img(x, y) = static_cast<std::uint8_t>(std::lround(127.5 - amplitude * std::cos(t)));
    }
  }
  return img;
}

inline GrayImage add_uniform_noise(const GrayImage& img, double amplitude, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  GrayImage out = img;
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + u(rng)), 0L, 255L));
  return out;
}

inline GrayImage uniform_noise_image(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage out(w, h, 0);
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(u(rng));
  return out;
}

// Union of random filled ellipses plus sparse salt pixels, as 0/1 bits.
inline BinaryImage random_blobs(int w, int h, std::uint32_t seed, int shapes = 12) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(0, w), uy(0, h), ur(1.0, 9.0), ua(0, std::numbers::pi);
  BinaryImage out(w, h, 0);
  for (int s = 0; s < shapes; ++s) {
    const double cx = ux(rng), cy = uy(rng), a = ur(rng), b = ur(rng), t = ua(rng);
    const double c = std::cos(t), sn = std::sin(t);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * c + dy * sn) / a, v = (-dx * sn + dy * c) / b;
        if (u * u + v * v <= 1.0) out(x, y) = 1;
      }
    }
  }
  std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
  for (int i = 0; i < w * h / 100; ++i) out(px(rng), py(rng)) = 1;
  return out;
}

// Normalized cross-correlation over the window [x0, x1) x [y0, y1).
template <typename A, typename B>
double ncc(const A& a, const B& b, int x0, int y0, int x1, int y1) {
  double sa = 0, sb = 0, n = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sa += a(x, y);
      sb += b(x, y);
      ++n;
    }
  }
  const double ma = sa / n, mb = sb / n;
  double cab = 0, caa = 0, cbb = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double da = a(x, y) - ma, db = b(x, y) - mb;
      cab += da * db;
      caa += da * da;
      cbb += db * db;
    }
  }
  return cab / std::sqrt(caa * cbb);
}

// Ridge direction of a block from a central-difference structure tensor.
inline double block_orientation(const Grid<double>& img, int x0, int y0, int size) {
  double jxx = 0, jyy = 0, jxy = 0;
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) {
      const double gx = 0.5 * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      const double gy = 0.5 * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
      jxx += gx * gx;
      jyy += gy * gy;
      jxy += gx * gy;
    }
  }
  // Eigenvector of the smaller eigenvalue = ridge direction.
  const double grad = 0.5 * std::atan2(2.0 * jxy, jxx - jyy);
  double ridge = grad + std::numbers::pi / 2;
  ridge = std::fmod(ridge, std::numbers::pi);
  if (ridge < 0) ridge += std::numbers::pi;
  return ridge;
}

// Smallest difference between two undirected orientations, in [0, pi/2].
inline double orientation_error(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

}  // namespace fpx::oracle
