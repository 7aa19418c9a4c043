#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fpx/image.hpp"

namespace fpx {

enum class MinutiaKind : std::uint8_t { ending, bifurcation };

struct Minutia {
  int x = 0;
  int y = 0;
  MinutiaKind kind = MinutiaKind::ending;
  double direction = 0.0;  // radians in [0, 2*pi), ridge tangent leaving the point

  friend bool operator==(const Minutia&, const Minutia&) = default;
};

enum class Provenance : std::uint8_t { raw, postprocessed, ground_truth };

struct MinutiaeSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Minutia> minutiae;
  Provenance provenance = Provenance::raw;

  std::size_t size() const { return minutiae.size(); }

  friend bool operator==(const MinutiaeSet&, const MinutiaeSet&) = default;
};

struct PostprocessParams {
  int adjacency_window = 6;  // Chebyshev radius for mutually adjacent minutiae
  int border_distance = 10;
  int reconnect_gap = 6;     // Euclidean, between facing endings
  int spur_length = 6;       // ridge-path length from ending to bifurcation

  void validate() const {
    if (adjacency_window < 0 || border_distance < 0 || reconnect_gap < 0 || spur_length < 0) {
      throw std::invalid_argument("postprocess parameters must be non-negative");
    }
  }
};

/// Number of steps walked along each branch to estimate a minutia direction.
inline constexpr int kDirectionWalk = 5;

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    return std::tie(a.y, a.x) <=> std::tie(b.y, b.x);
  }
};

/// Ridge pixels in the 3x3 window centred on (x, y), centre included.
inline int neighborhood_count(const Grid<std::uint8_t>& skel, int x, int y) {
  if (!skel.contains(x, y)) throw std::out_of_range("neighborhood_count: centre out of bounds");
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) n += skel.value_or(x + dx, y + dy, 0) ? 1 : 0;
  }
  return n;
}

enum class PixelClass : std::uint8_t { background, isolated, ending, ridge, bifurcation };

/// Class of a skeleton pixel from its 9-pixel count: 2 ending, 3 plain
/// ridge, 4 or more bifurcation.
inline PixelClass classify_pixel(const Grid<std::uint8_t>& skel, int x, int y) {
  if (!skel.contains(x, y)) throw std::out_of_range("classify_pixel: pixel out of bounds");
  if (!skel(x, y)) return PixelClass::background;
  const int n = neighborhood_count(skel, x, y);
  if (n >= 4) return PixelClass::bifurcation;
  if (n == 3) return PixelClass::ridge;
  if (n == 2) return PixelClass::ending;
  return PixelClass::isolated;
}

namespace detail {

// Neighbour offsets, 4-neighbours first so walks prefer straight steps.
inline constexpr std::array<Point, 8> kOffsets = {
    Point{0, -1}, Point{1, 0}, Point{0, 1}, Point{-1, 0},
    Point{1, -1}, Point{1, 1}, Point{-1, 1}, Point{-1, -1}};

inline double wrap_turn(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  if (a >= 2.0 * std::numbers::pi) a = 0.0;
  return a;
}

// Absolute angular difference in [0, pi].
inline double angle_between(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

struct Walk {
  std::vector<Point> path;  // pixels visited after the origin
  bool hit_junction = false;
  bool hit_ending = false;
};

// Follows a ridge from `origin` through `first` for at most `max_steps`
// moves. Stops on entering a junction pixel (count >= 4), an ending, or a
// dead end. `blocked` pixels are never entered.
inline Walk walk_ridge(const Grid<std::uint8_t>& skel, Point origin, Point first, int max_steps,
                       const std::vector<Point>& blocked = {}) {
  Walk w;
  std::vector<Point> seen = blocked;
  seen.push_back(origin);
  Point cur = first;
  for (int step = 1; step <= max_steps; ++step) {
    w.path.push_back(cur);
    seen.push_back(cur);
    const int n = neighborhood_count(skel, cur.x, cur.y);
    if (n >= 4) {
      w.hit_junction = true;
      return w;
    }
    if (n <= 2) {
      w.hit_ending = n == 2;
      return w;
    }
    std::optional<Point> next;
    for (const auto& o : kOffsets) {
      const Point q{cur.x + o.x, cur.y + o.y};
      if (!skel.value_or(q.x, q.y, 0)) continue;
      if (std::find(seen.begin(), seen.end(), q) != seen.end()) continue;
      next = q;
      break;
    }
    if (!next) return w;
    cur = *next;
  }
  return w;
}

inline double direction_to(Point from, Point to) {
  return wrap_turn(std::atan2(static_cast<double>(to.y - from.y), static_cast<double>(to.x - from.x)));
}

inline std::vector<Point> ridge_neighbors(const Grid<std::uint8_t>& skel, Point p) {
  std::vector<Point> out;
  for (const auto& o : kOffsets) {
    if (skel.value_or(p.x + o.x, p.y + o.y, 0)) out.push_back({p.x + o.x, p.y + o.y});
  }
  return out;
}

// 8-connected set of junction pixels (count >= 4) containing `seed`.
inline std::vector<Point> junction_cluster(const Grid<std::uint8_t>& skel, Point seed) {
  std::vector<Point> cluster{seed};
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    const Point p = cluster[i];
    for (const auto& q : ridge_neighbors(skel, p)) {
      if (neighborhood_count(skel, q.x, q.y) < 4) continue;
      if (std::find(cluster.begin(), cluster.end(), q) != cluster.end()) continue;
      cluster.push_back(q);
    }
  }
  std::sort(cluster.begin(), cluster.end());
  return cluster;
}

inline double ending_direction(const Grid<std::uint8_t>& skel, Point p) {
  const auto nb = ridge_neighbors(skel, p);
  if (nb.empty()) return 0.0;
  const auto w = walk_ridge(skel, p, nb.front(), kDirectionWalk);
  return direction_to(p, w.path.back());
}

// Direction of the branch lying on the bisector of the other two.
inline double bifurcation_direction(const Grid<std::uint8_t>& skel, Point rep,
                                    const std::vector<Point>& cluster) {
  std::vector<Point> starts;
  for (const auto& c : cluster) {
    for (const auto& q : ridge_neighbors(skel, c)) {
      if (std::find(cluster.begin(), cluster.end(), q) != cluster.end()) continue;
      if (std::find(starts.begin(), starts.end(), q) != starts.end()) continue;
      starts.push_back(q);
    }
  }
  std::vector<double> dirs;
  for (const auto& s : starts) {
    const auto w = walk_ridge(skel, rep, s, kDirectionWalk, cluster);
    dirs.push_back(direction_to(rep, w.path.back()));
  }
  if (dirs.empty()) return 0.0;
  if (dirs.size() < 3) return dirs.front();

  std::size_t best = 0;
  double best_gap = 10.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      if (j == i) continue;
      sx += std::cos(dirs[j]);
      sy += std::sin(dirs[j]);
    }
    if (sx == 0.0 && sy == 0.0) continue;
    const double gap = angle_between(dirs[i], std::atan2(-sy, -sx));
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return dirs[best];
}

// Bresenham segment, endpoints included.
inline std::vector<Point> line_pixels(Point a, Point b) {
  std::vector<Point> out;
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Point p = a;
  for (;;) {
    out.push_back(p);
    if (p == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

// Chessboard distance to the nearest background pixel, minus one, so a
// foreground pixel touching background scores 0 like a pixel on the edge.
inline Grid<int> distance_to_background(const Grid<std::uint8_t>& region) {
  const int w = region.width(), h = region.height();
  const int far = w + h;
  Grid<int> d(w, h, far);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!region(x, y)) {
        d(x, y) = -1;
        continue;
      }
      int v = d(x, y);
      for (const Point o : {Point{-1, -1}, Point{0, -1}, Point{1, -1}, Point{-1, 0}}) {
        if (d.contains(x + o.x, y + o.y)) v = std::min(v, d(x + o.x, y + o.y) + 1);
      }
      d(x, y) = v;
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      int v = d(x, y);
      for (const Point o : {Point{1, 1}, Point{0, 1}, Point{-1, 1}, Point{1, 0}}) {
        if (d.contains(x + o.x, y + o.y)) v = std::min(v, d(x + o.x, y + o.y) + 1);
      }
      d(x, y) = v;
    }
  }
  return d;
}

}  // namespace detail

/// Count rule on the 9-pixel neighbourhood: 2 = ending, >= 4 = bifurcation,
/// 3 = plain ridge. Adjacent bifurcation pixels collapse to the one with the
/// highest count (first in row-major order on ties).
inline MinutiaeSet extract_minutiae(const Skeleton& skel, std::string image_id = {}) {
  MinutiaeSet set{std::move(image_id), skel.width(), skel.height(), {}, Provenance::raw};
  Grid<std::uint8_t> done(skel.width(), skel.height(), 0);

  for (int y = 0; y < skel.height(); ++y) {
    for (int x = 0; x < skel.width(); ++x) {
      const auto cls = classify_pixel(skel, x, y);
      if (cls == PixelClass::ending) {
        set.minutiae.push_back({x, y, MinutiaKind::ending, detail::ending_direction(skel, {x, y})});
      } else if (cls == PixelClass::bifurcation && !done(x, y)) {
        const auto cluster = detail::junction_cluster(skel, {x, y});
        Point rep = cluster.front();
        int best = -1;
        for (const auto& c : cluster) {
          done(c.x, c.y) = 1;
          const int cn = neighborhood_count(skel, c.x, c.y);
          if (cn > best) {
            best = cn;
            rep = c;
          }
        }
        set.minutiae.push_back({rep.x, rep.y, MinutiaKind::bifurcation,
                                detail::bifurcation_direction(skel, rep, cluster)});
      }
    }
  }
  std::stable_sort(set.minutiae.begin(), set.minutiae.end(), [](const Minutia& a, const Minutia& b) {
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  });
  return set;
}

/// Removes spurious minutiae and repairs the skeleton. Rules run in order:
///   1. spurs: an ending whose ridge path reaches a bifurcation within
///      `spur_length` steps is removed together with that bifurcation, and
///      the branch is erased;
///   2. border: minutiae closer than `border_distance` to an image edge;
///   3. reconnection: facing endings within `reconnect_gap` with no ridge
///      between them are joined by a straight segment and both removed;
///   4. adjacency: every minutia with another within `adjacency_window`
///      (Chebyshev) is removed, both members of a pair included.
///
/// With a `region` bitmap (non-zero = foreground), rule 2 measures the
/// distance to the nearest background pixel as well as to the image edge.
inline std::pair<MinutiaeSet, Skeleton> postprocess(const MinutiaeSet& set, const Skeleton& skel,
                                                    const PostprocessParams& params = {},
                                                    const Grid<std::uint8_t>* region = nullptr) {
  params.validate();
  Grid<std::uint8_t> bits = skel;
  std::vector<Minutia> kept = set.minutiae;
  std::vector<bool> alive(kept.size(), true);

  // 1. Spurs.
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!alive[i] || kept[i].kind != MinutiaKind::ending) continue;
    const Point p{kept[i].x, kept[i].y};
    if (!bits.value_or(p.x, p.y, 0) || neighborhood_count(bits, p.x, p.y) != 2) continue;
    const auto nb = detail::ridge_neighbors(bits, p);
    const auto w = detail::walk_ridge(bits, p, nb.front(), params.spur_length);
    if (!w.hit_junction) continue;

    const Point junction = w.path.back();
    const auto cluster = detail::junction_cluster(bits, junction);
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (!alive[j] || kept[j].kind != MinutiaKind::bifurcation) continue;
      for (const auto& c : cluster) {
        if (std::abs(kept[j].x - c.x) <= 1 && std::abs(kept[j].y - c.y) <= 1) {
          alive[j] = false;
          break;
        }
      }
    }
    alive[i] = false;
    bits(p.x, p.y) = 0;
    for (std::size_t k = 0; k + 1 < w.path.size(); ++k) bits(w.path[k].x, w.path[k].y) = 0;
  }

  // 2. Border.
  std::optional<Grid<int>> region_distance;
  if (region) {
    if (region->width() != bits.width() || region->height() != bits.height()) {
      throw std::invalid_argument("postprocess: region does not match the skeleton");
    }
    region_distance = detail::distance_to_background(*region);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!alive[i]) continue;
    const auto& m = kept[i];
    int d = std::min({m.x, m.y, bits.width() - 1 - m.x, bits.height() - 1 - m.y});
    if (region_distance) d = std::min(d, (*region_distance)(m.x, m.y));
    if (d < params.border_distance) alive[i] = false;
  }

  // 3. Reconnection of facing endings.
  {
    struct Pair {
      double dist;
      std::size_t a, b;
    };
    std::vector<Pair> pairs;
    const double tol = std::numbers::pi / 6.0;
    for (std::size_t a = 0; a < kept.size(); ++a) {
      if (!alive[a] || kept[a].kind != MinutiaKind::ending) continue;
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        if (!alive[b] || kept[b].kind != MinutiaKind::ending) continue;
        const double d = std::hypot(kept[a].x - kept[b].x, kept[a].y - kept[b].y);
        if (d > params.reconnect_gap) continue;
        if (detail::angle_between(kept[a].direction, kept[b].direction) < std::numbers::pi - tol) continue;
        pairs.push_back({d, a, b});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) { return l.dist < r.dist; });
    for (const auto& pr : pairs) {
      if (!alive[pr.a] || !alive[pr.b]) continue;
      const auto seg = detail::line_pixels({kept[pr.a].x, kept[pr.a].y}, {kept[pr.b].x, kept[pr.b].y});
      bool clear = true;
      for (std::size_t k = 1; k + 1 < seg.size(); ++k) {
        if (bits(seg[k].x, seg[k].y)) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      for (const auto& q : seg) bits(q.x, q.y) = 1;
      alive[pr.a] = false;
      alive[pr.b] = false;
    }
  }

  // 4. Mutual adjacency.
  {
    std::vector<bool> drop(kept.size(), false);
    for (std::size_t a = 0; a < kept.size(); ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        if (!alive[b]) continue;
        if (std::abs(kept[a].x - kept[b].x) <= params.adjacency_window &&
            std::abs(kept[a].y - kept[b].y) <= params.adjacency_window) {
          drop[a] = true;
          drop[b] = true;
        }
      }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (drop[i]) alive[i] = false;
    }
  }

  MinutiaeSet out{set.image_id, set.width, set.height, {}, Provenance::postprocessed};
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (alive[i]) out.minutiae.push_back(kept[i]);
  }
  return {std::move(out), Skeleton(bits)};
}

// Text format, shared by detections and ground truth:
//   # image_id width height
//   x y kind direction_deg        (kind E or B, one decimal)

class MinutiaeFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_minutiae(std::ostream& os, const MinutiaeSet& set) {
  os << "# " << set.image_id << ' ' << set.width << ' ' << set.height << '\n';
  char buf[64];
  for (const auto& m : set.minutiae) {
    double deg = std::round(m.direction * 1800.0 / std::numbers::pi) / 10.0;
    if (deg >= 360.0) deg -= 360.0;
    if (deg < 0.0) deg += 360.0;
    std::snprintf(buf, sizeof buf, "%d %d %c %.1f\n", m.x, m.y,
                  m.kind == MinutiaKind::ending ? 'E' : 'B', deg);
    os << buf;
  }
}

inline MinutiaeSet read_minutiae(std::istream& is, Provenance provenance = Provenance::ground_truth) {
  MinutiaeSet set;
  set.provenance = provenance;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    if (!header) {
      std::string hash;
      if (!(ls >> hash >> set.image_id >> set.width >> set.height) || hash != "#") {
        throw MinutiaeFormatError("minutiae file: malformed header");
      }
      header = true;
      continue;
    }
    Minutia m;
    std::string kind;
    double deg = 0.0;
    if (!(ls >> m.x >> m.y >> kind >> deg) || (kind != "E" && kind != "B")) {
      throw MinutiaeFormatError("minutiae file: malformed line " + std::to_string(lineno));
    }
    m.kind = kind == "E" ? MinutiaKind::ending : MinutiaKind::bifurcation;
    m.direction = detail::wrap_turn(deg * std::numbers::pi / 180.0);
    set.minutiae.push_back(m);
  }
  if (!header) throw MinutiaeFormatError("minutiae file: missing header");
  return set;
}

}  // namespace fpx
