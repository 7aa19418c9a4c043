#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpx/config.hpp"
#include "fpx/image.hpp"
#include "fpx/minutiae.hpp"

namespace fpx {

enum class PatternKind : std::uint8_t { parallel, concentric };

struct InjectedMinutia {
  double x = 0.0;
  double y = 0.0;
  MinutiaKind kind = MinutiaKind::ending;
};

/// Recipe for a synthetic ridge image.
///
/// `angle_deg` is the direction in which a parallel pattern's intensity
/// varies (0 gives vertical ridges); a concentric pattern is centred on
/// (`center_x`, `center_y`), which may lie outside the image. In addition to
/// the explicit `injected` list, `random_minutiae` extra points are placed
/// from the seed.
struct SynthSpec {
  std::string image_id = "synth";
  int width = 256;
  int height = 256;
  PatternKind pattern = PatternKind::parallel;
  double angle_deg = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double period = 8.0;
  std::vector<InjectedMinutia> injected;
  int random_minutiae = 0;
  double noise_amplitude = 0.0;
  double contrast = 100.0;
  std::uint64_t seed = 1;
};

class SynthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthImage {
  GrayImage image;
  MinutiaeSet truth;
};

namespace detail {

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

inline bool placement_ok(const SynthSpec& spec, const std::vector<InjectedMinutia>& placed,
                         const InjectedMinutia& m, std::string* why) {
  const double margin = 2.0 * spec.period;
  if (m.x < margin || m.y < margin || m.x > spec.width - 1 - margin || m.y > spec.height - 1 - margin) {
    if (why) *why = "closer than 2 periods to the image border";
    return false;
  }
  if (spec.pattern == PatternKind::concentric &&
      std::hypot(m.x - spec.center_x, m.y - spec.center_y) < margin) {
    if (why) *why = "closer than 2 periods to the pattern centre";
    return false;
  }
  for (const auto& o : placed) {
    if (std::hypot(m.x - o.x, m.y - o.y) < 3.0 * spec.period) {
      if (why) *why = "closer than 3 periods to another minutia";
      return false;
    }
  }
  return true;
}

}  // namespace detail

/// Checks the spec's invariants; throws SynthError naming the violation.
inline void validate(const SynthSpec& spec) {
  if (spec.width < 32 || spec.height < 32) throw SynthError("synth: image must be at least 32x32");
  if (spec.period < 4.0 || spec.period > 20.0) throw SynthError("synth: period must be in [4, 20]");
  if (spec.noise_amplitude < 0.0) throw SynthError("synth: noise amplitude must be >= 0");
  if (spec.random_minutiae < 0) throw SynthError("synth: random_minutiae must be >= 0");
  std::vector<InjectedMinutia> placed;
  for (std::size_t i = 0; i < spec.injected.size(); ++i) {
    std::string why;
    if (!detail::placement_ok(spec, placed, spec.injected[i], &why)) {
      throw SynthError("synth: injected minutia " + std::to_string(i) + " is " + why);
    }
    placed.push_back(spec.injected[i]);
  }
}

/// Renders the ridge pattern and its exact ground truth.
///
/// Each minutia is a unit phase dislocation (a spiral term added to the
/// ridge phase), with alternating winding signs. The local phase offset at
/// the dislocation decides whether the ridge ends or forks there; a compact
/// phase bump, reaching no further than the nearest other minutia (3 to 8
/// periods), sets it to the requested kind without disturbing the others.
/// Ridges are dark.
inline SynthImage generate(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);

  std::vector<InjectedMinutia> pts = spec.injected;
  for (int i = 0; i < spec.random_minutiae; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      InjectedMinutia m{detail::unit_uniform(rng) * (spec.width - 1),
                        detail::unit_uniform(rng) * (spec.height - 1),
                        detail::unit_uniform(rng) < 0.5 ? MinutiaKind::ending : MinutiaKind::bifurcation};
      m.x = std::round(m.x);
      m.y = std::round(m.y);
      if (detail::placement_ok(spec, pts, m, nullptr)) {
        pts.push_back(m);
        placed = true;
      }
    }
    if (!placed) throw SynthError("synth: cannot place " + std::to_string(spec.random_minutiae) +
                                  " random minutiae with the required spacing");
  }

  const double k = 2.0 * std::numbers::pi / spec.period;
  const double a = spec.angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);

  auto base_phase = [&](double x, double y) {
    return spec.pattern == PatternKind::parallel ? k * (x * ca + y * sa)
                                                 : k * std::hypot(x - spec.center_x, y - spec.center_y);
  };
  auto base_gradient = [&](double x, double y, double& gx, double& gy) {
    if (spec.pattern == PatternKind::parallel) {
      gx = k * ca;
      gy = k * sa;
    } else {
      const double dx = x - spec.center_x, dy = y - spec.center_y;
      const double r = std::max(std::hypot(dx, dy), 1e-9);
      gx = k * dx / r;
      gy = k * dy / r;
    }
  };

  const std::size_t n = pts.size();
  std::vector<double> winding(n), offset(n);
  for (std::size_t i = 0; i < n; ++i) winding[i] = (i % 2 == 0) ? 1.0 : -1.0;

  // Each bump must vanish at every other minutia; within that, wider bumps
  // bend the ridge period less.
  std::vector<double> bump_r2(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = 8.0 * spec.period;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) r = std::min(r, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    }
    r = std::max(r, 3.0 * spec.period);
    bump_r2[i] = r * r;
  }

  // Offsets tuned empirically against the skeleton topology: a local phase
  // of 3pi/4 yields a ridge ending, 7pi/4 a bifurcation (ridge = cos > 0).
  for (std::size_t i = 0; i < n; ++i) {
    double phase = base_phase(pts[i].x, pts[i].y);
    double gx = 0.0, gy = 0.0;
    base_gradient(pts[i].x, pts[i].y, gx, gy);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
      const double r2 = dx * dx + dy * dy;
      phase += winding[j] * std::atan2(dy, dx);
      gx += winding[j] * (-dy / r2);
      gy += winding[j] * (dx / r2);
    }
    const double alpha = std::atan2(gy, gx);
    const double target = pts[i].kind == MinutiaKind::ending ? 0.75 * std::numbers::pi
                                                             : 1.75 * std::numbers::pi;
    offset[i] = detail::wrap_pi(target - winding[i] * alpha - phase);
  }

  GrayImage img(spec.width, spec.height, 0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double psi = base_phase(x, y);
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = x - pts[j].x, dy = y - pts[j].y;
        psi += winding[j] * std::atan2(dy, dx);
        const double u2 = (dx * dx + dy * dy) / bump_r2[j];
        if (u2 < 1.0) psi += offset[j] * (1.0 - u2) * (1.0 - u2);
      }
      double v = 127.5 - spec.contrast * std::cos(psi);
      if (spec.noise_amplitude > 0.0) {
        v += (2.0 * detail::unit_uniform(rng) - 1.0) * spec.noise_amplitude;
      }
      img(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }

  MinutiaeSet truth{spec.image_id, spec.width, spec.height, {}, Provenance::ground_truth};
  for (const auto& p : pts) {
    double gx = 0.0, gy = 0.0;
    base_gradient(p.x, p.y, gx, gy);
    truth.minutiae.push_back({static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)),
                              p.kind, detail::wrap_turn(std::atan2(gy, gx) + std::numbers::pi / 2)});
  }
  return {std::move(img), std::move(truth)};
}

/// Reads a spec from key-value text. Keys: image_id, width, height,
/// pattern (parallel|concentric), angle, center_x, center_y, period, noise,
/// contrast, seed, random_minutiae, and repeatable `minutia = x y E|B`.
inline SynthSpec parse_synth_spec(const KeyValueFile& kv) {
  SynthSpec s;
  static const std::vector<std::string> known = {
      "image_id", "width", "height", "pattern", "angle", "center_x", "center_y", "period",
      "noise", "contrast", "seed", "random_minutiae", "minutia"};
  for (const auto& [key, value] : kv.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("synth spec: unknown key '" + key + "'");
    }
  }
  if (auto v = kv.get("image_id")) s.image_id = *v;
  if (auto v = kv.get("width")) s.width = parse_value<int>("width", *v);
  if (auto v = kv.get("height")) s.height = parse_value<int>("height", *v);
  if (auto v = kv.get("pattern")) {
    if (*v == "parallel") {
      s.pattern = PatternKind::parallel;
    } else if (*v == "concentric") {
      s.pattern = PatternKind::concentric;
    } else {
      throw ConfigError("synth spec: pattern must be parallel or concentric");
    }
  }
  if (auto v = kv.get("angle")) s.angle_deg = parse_value<double>("angle", *v);
  if (auto v = kv.get("center_x")) s.center_x = parse_value<double>("center_x", *v);
  if (auto v = kv.get("center_y")) s.center_y = parse_value<double>("center_y", *v);
  if (auto v = kv.get("period")) s.period = parse_value<double>("period", *v);
  if (auto v = kv.get("noise")) s.noise_amplitude = parse_value<double>("noise", *v);
  if (auto v = kv.get("contrast")) s.contrast = parse_value<double>("contrast", *v);
  if (auto v = kv.get("seed")) s.seed = parse_value<std::uint64_t>("seed", *v);
  if (auto v = kv.get("random_minutiae")) s.random_minutiae = parse_value<int>("random_minutiae", *v);
  for (const auto& line : kv.all("minutia")) {
    std::istringstream is(line);
    InjectedMinutia m;
    std::string kind;
    if (!(is >> m.x >> m.y >> kind) || (kind != "E" && kind != "B")) {
      throw ConfigError("synth spec: minutia must be 'x y E|B', got '" + line + "'");
    }
    m.kind = kind == "E" ? MinutiaKind::ending : MinutiaKind::bifurcation;
    s.injected.push_back(m);
  }
  return s;
}

}  // namespace fpx
