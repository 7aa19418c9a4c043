#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fpx/enhance.hpp"
#include "fpx/image.hpp"

namespace fpx {

struct BinarizeParams {
  int threshold = 128;  // T_p

  static BinarizeParams fixed(int t) {
    if (t < 0 || t > 255) throw std::invalid_argument("binarize threshold must be in [0, 255]");
    return {t};
  }
};

/// 1 where I(x, y) >= T_p, else 0.
inline BinaryImage binarize(const GrayImage& img, const BinarizeParams& params) {
  if (params.threshold < 0 || params.threshold > 255) {
    throw std::invalid_argument("binarize threshold must be in [0, 255]");
  }
  BinaryImage out(img.width(), img.height(), 0);
  const auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= params.threshold ? 1 : 0;
  return out;
}

/// T_p = rounded mean intensity over the recoverable pixels.
inline BinarizeParams auto_threshold(const GrayImage& img, const RegionMask& mask) {
  if (mask.geometry.width != img.width() || mask.geometry.height != img.height()) {
    throw std::invalid_argument("auto_threshold: mask does not cover the image");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.recoverable_pixel(x, y)) continue;
      sum += img(x, y);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("auto_threshold: no recoverable pixels");
  return BinarizeParams::fixed(static_cast<int>(std::lround(sum / static_cast<double>(n))));
}

namespace detail {

// Neighbours in the order N, NE, E, SE, S, SW, W, NW (P2..P9 in the usual
// thinning notation). Off-grid pixels read as background.
inline std::array<int, 8> ring(const Grid<std::uint8_t>& b, int x, int y) {
  return {b.value_or(x, y - 1, 0) ? 1 : 0,     b.value_or(x + 1, y - 1, 0) ? 1 : 0,
          b.value_or(x + 1, y, 0) ? 1 : 0,     b.value_or(x + 1, y + 1, 0) ? 1 : 0,
          b.value_or(x, y + 1, 0) ? 1 : 0,     b.value_or(x - 1, y + 1, 0) ? 1 : 0,
          b.value_or(x - 1, y, 0) ? 1 : 0,     b.value_or(x - 1, y - 1, 0) ? 1 : 0};
}

inline int ring_count(const std::array<int, 8>& p) {
  int n = 0;
  for (int v : p) n += v;
  return n;
}

// 0 -> 1 transitions around the ring.
inline int ring_transitions(const std::array<int, 8>& p) {
  int a = 0;
  for (int i = 0; i < 8; ++i) a += (p[i] == 0 && p[(i + 1) % 8] == 1) ? 1 : 0;
  return a;
}

// Yokoi 8-connectivity number; 1 means removing the pixel keeps topology.
inline int connectivity8(const std::array<int, 8>& p) {
  // Re-index to E, NE, N, NW, W, SW, S, SE.
  const std::array<int, 8> q = {p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]};
  int n = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - q[k];
    const int b = 1 - q[(k + 1) % 8];
    const int c = 1 - q[(k + 2) % 8];
    n += a - a * b * c;
  }
  return n;
}

inline bool deletable(const Grid<std::uint8_t>& b, int x, int y) {
  const auto p = ring(b, x, y);
  const int n = ring_count(p);
  return n >= 2 && n <= 6 && connectivity8(p) == 1;
}

// One Zhang-Suen subiteration. Candidates are marked on a snapshot, then
// removed one at a time, re-checking simplicity against the current image so
// that no component is ever split or erased.
inline bool thinning_subiteration(Grid<std::uint8_t>& b, int phase) {
  std::vector<std::pair<int, int>> candidates;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (!b(x, y)) continue;
      const auto p = ring(b, x, y);
      const int n = ring_count(p);
      if (n < 2 || n > 6 || ring_transitions(p) != 1) continue;
      const bool keep = phase == 0 ? (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0)
                                   : (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0);
      if (!keep) candidates.emplace_back(x, y);
    }
  }
  bool changed = false;
  for (auto [x, y] : candidates) {
    if (deletable(b, x, y)) {
      b(x, y) = 0;
      changed = true;
    }
  }
  return changed;
}

// Removes corner pixels left on staircases and junctions so that every
// through-ridge pixel has exactly two ridge neighbours.
inline bool prune_redundant(Grid<std::uint8_t>& b) {
  bool changed = false;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (b(x, y) && deletable(b, x, y)) {
        b(x, y) = 0;
        changed = true;
      }
    }
  }
  return changed;
}

inline bool full_square(const Grid<std::uint8_t>& b, int x, int y) {
  return b.value_or(x, y, 0) && b.value_or(x + 1, y, 0) && b.value_or(x, y + 1, 0) &&
         b.value_or(x + 1, y + 1, 0);
}

// 8-connected foreground components and 4-connected background components
// (the frame outside the grid counts as background).
inline std::pair<int, int> topology(const Grid<std::uint8_t>& b) {
  const int w = b.width() + 2, h = b.height() + 2;
  std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int x, int y) { return b.value_or(x - 1, y - 1, 0) != 0; };
  int fg = 0, bg = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (seen[y * w + x]) continue;
      const bool fore = at(x, y);
      (fore ? fg : bg) += 1;
      seen[y * w + x] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!fore && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || seen[ny * w + nx] || at(nx, ny) != fore) continue;
            seen[ny * w + nx] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return {fg, bg};
}

// A full 2x2 block none of whose pixels is simple (two diagonal lines
// crossing between pixel centres, or a junction of many arms). Moves one
// block pixel to an outside 4-neighbour when that keeps the topology and
// creates no other full block.
inline bool break_squares(Grid<std::uint8_t>& b) {
  bool changed = false;
  for (int y = 0; y + 1 < b.height(); ++y) {
    for (int x = 0; x + 1 < b.width(); ++x) {
      if (!full_square(b, x, y)) continue;
      const auto before = topology(b);
      bool fixed = false;
      for (int k = 0; k < 4 && !fixed; ++k) {
        const int px = x + (k & 1), py = y + (k >> 1);
        const int ox = (k & 1) ? 1 : -1, oy = (k >> 1) ? 1 : -1;
        for (auto [qx, qy] : {std::pair{px + ox, py}, std::pair{px, py + oy}}) {
          if (!b.contains(qx, qy) || b(qx, qy)) continue;
          b(px, py) = 0;
          b(qx, qy) = 1;
          bool square = false;
          for (int sy = qy - 1; sy <= qy; ++sy) {
            for (int sx = qx - 1; sx <= qx; ++sx) square = square || full_square(b, sx, sy);
          }
          if (!square && topology(b) == before) {
            fixed = true;
            break;
          }
          b(px, py) = 1;
          b(qx, qy) = 0;
        }
      }
      changed = changed || fixed;
    }
  }
  return changed;
}

}  // namespace detail

/// Two-subiteration boundary peeling to a fixpoint, followed by removal of
/// redundant corner pixels. Preserves 8-connected components and endpoints.
/// A 2x2 block that cannot be peeled is reshaped by moving one pixel, so the
/// result is not always a strict subset of the input.
inline Skeleton thin(const BinaryImage& bin) {
  Grid<std::uint8_t> b = bin;
  for (auto& v : b.pixels()) v = v ? 1 : 0;

  for (;;) {
    bool changed = false;
    for (;;) {
      const bool a = detail::thinning_subiteration(b, 0);
      const bool c = detail::thinning_subiteration(b, 1);
      if (!a && !c) break;
      changed = true;
    }
    while (detail::prune_redundant(b)) changed = true;
    if (!changed && !detail::break_squares(b)) break;
  }
  return Skeleton(b);
}

}  // namespace fpx
