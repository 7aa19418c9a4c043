// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "fpx/pipeline.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
namespace oracle = fpx::oracle;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool ok = true;
  std::string detail;
};

Verdict fail(std::string why) { return {false, std::move(why)}; }

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

fpx::NormalizedImage norm(const fpx::GrayImage& g) { return fpx::normalize(g, 100, 100); }

// Per-block result over interior blocks only.
template <class Good>
double interior_fraction(const fpx::BlockGeometry& geo, Good good) {
  int total = 0, ok = 0;
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!geo.interior(c, r)) continue;
      ++total;
      ok += good(c, r);
    }
  }
  return total ? static_cast<double>(ok) / total : 0.0;
}

Verdict binarize_exact() {
  std::mt19937 rng(2024);
  for (int i = 0; i < 100; ++i) {
    fpx::GrayImage img(64, 64, 0);
    for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng() & 0xff);
    const int t = static_cast<int>(rng() % 256);
    const auto b = fpx::binarize(img, fpx::BinarizeParams::fixed(t));
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (b(x, y) != (img(x, y) >= t ? 1 : 0)) return fail(fmt("image %.0f threshold %.0f", i, t));
      }
    }
  }
  return {true, "100 images bit-exact"};
}

Verdict classification_exhaustive() {
  const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  int mismatches = 0;
  for (unsigned mask = 0; mask < 256; ++mask) {
    fpx::Skeleton s(5, 5, 0);
    s(2, 2) = 1;
    for (int i = 0; i < 8; ++i) {
      if (mask & (1u << i)) s(2 + dx[i], 2 + dy[i]) = 1;
    }
    const int count = 1 + std::popcount(mask);
    const auto want = count == 2   ? fpx::PixelClass::ending
                      : count == 3 ? fpx::PixelClass::ridge
                      : count >= 4 ? fpx::PixelClass::bifurcation
                                   : fpx::PixelClass::isolated;
    mismatches += fpx::neighborhood_count(s, 2, 2) != count || fpx::classify_pixel(s, 2, 2) != want;
  }
  if (mismatches) return fail(fmt("%.0f mismatches", mismatches));
  return {true, "256 patterns, 0 mismatches"};
}

Verdict orientation_recovery() {
  double worst = 1.0;
  for (double angle : {0.0, 30.0, 60.0, 90.0, 120.0, 150.0}) {
    // Wave direction `angle`; ridges run perpendicular to it.
    const auto img = norm(oracle::stripes(256, 256, angle, 8.0));
    const auto field = fpx::estimate_orientation(img);
    const double want = std::fmod(angle * kPi / 180.0 + kPi / 2, kPi);
    const double frac = interior_fraction(field.geometry, [&](int c, int r) {
      return oracle::orientation_error(field.theta(c, r), want) <= 5.0 * kPi / 180.0;
    });
    worst = std::min(worst, frac);
    if (frac < 0.95) return fail(fmt("angle %.0f: %.3f of blocks within 5 deg", angle, frac));
  }
  return {true, fmt("worst angle %.3f of blocks within 5 deg", worst)};
}

Verdict frequency_recovery() {
  double worst = 1.0;
  for (double period : {4.0, 6.0, 8.0, 10.0, 12.0}) {
    const auto img = norm(oracle::stripes(256, 256, 35.0, period));
    const auto map = fpx::estimate_frequency(img, fpx::estimate_orientation(img));
    const double frac = interior_fraction(map.geometry, [&](int c, int r) {
      const auto& f = map.freq(c, r);
      return f && std::abs(*f - 1.0 / period) <= 0.1 / period;
    });
    worst = std::min(worst, frac);
    if (frac < 0.9) return fail(fmt("period %.0f: %.3f of blocks within 10%%", period, frac));
  }
  return {true, fmt("worst period %.3f of blocks within 10%%", worst)};
}

double interior_rms(const fpx::Grid<double>& g, int margin) {
  double s = 0;
  int n = 0;
  for (int y = margin; y < g.height() - margin; ++y) {
    for (int x = margin; x < g.width() - margin; ++x) {
      s += g(x, y) * g(x, y);
      ++n;
    }
  }
  return std::sqrt(s / n);
}

Verdict gabor_selectivity_and_denoising() {
  double worst_ratio = 1e9;
  for (double period : {6.0, 8.0, 11.0}) {
    for (double angle : {0.0, 45.0, 100.0}) {
      const auto img = norm(oracle::stripes(128, 128, angle, period));
      const auto geo = fpx::BlockGeometry::of(128, 128, 16);
      const double theta = angle * kPi / 180.0 + kPi / 2;
      auto run = [&](double th) {
        const fpx::OrientationField o{geo, fpx::Grid<double>(geo.cols, geo.rows, th),
                                      fpx::Grid<double>(geo.cols, geo.rows, 1.0)};
        const fpx::FrequencyMap f{geo, fpx::Grid<std::optional<double>>(geo.cols, geo.rows, 1.0 / period)};
        const fpx::RegionMask m{geo, fpx::Grid<fpx::BlockLabel>(geo.cols, geo.rows, fpx::BlockLabel::recoverable),
                                1.0};
        return interior_rms(fpx::gabor_response(img, o, f, m).value, 16);
      };
      const double ratio = run(theta) / run(theta + kPi / 2);
      worst_ratio = std::min(worst_ratio, ratio);
      if (ratio < 5.0) return fail(fmt("period %.0f: matched/rotated ratio %.2f", period, ratio));
    }
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    fpx::SynthSpec spec;
    spec.seed = seed;
    spec.random_minutiae = 6;
    spec.angle_deg = 18.0 * seed;
    const auto clean = fpx::generate(spec).image;
    spec.noise_amplitude = 30;
    const auto noisy = fpx::generate(spec).image;
    const auto img = norm(noisy);
    const auto orient = fpx::estimate_orientation(img);
    const auto freq = fpx::estimate_frequency(img, orient);
    const auto mask = std::get<fpx::RegionMask>(fpx::compute_region_mask(img, orient, freq, {0.0, 0.0, 0.0}));
    const auto out = fpx::gabor_enhance(img, orient, freq, mask);
    const double e = oracle::ncc(out, clean, 16, 16, 240, 240), n = oracle::ncc(noisy, clean, 16, 16, 240, 240);
    if (!(e > n)) return fail(fmt("image %.0f: enhanced corr %.3f", static_cast<double>(seed), e) + fmt(" <= noisy %.3f", n));
  }
  return {true, fmt("worst selectivity ratio %.1f; 10/10 images denoised", worst_ratio)};
}

std::string skeleton_problem(const fpx::BinaryImage& b) {
  const auto s = fpx::thin(b);
  if (oracle::has_full_2x2(s)) return "2x2 block";
  if (oracle::count_components8(s) != oracle::count_components8(b)) return "component count changed";
  const fpx::BinaryImage again(s.width(), s.height(), std::vector<std::uint8_t>(s.pixels().begin(), s.pixels().end()));
  if (fpx::thin(again) != s) return "not idempotent";
  return {};
}

Verdict skeleton_invariants() {
  for (std::uint32_t seed = 1; seed <= 50; ++seed) {
    const auto why = skeleton_problem(oracle::random_blobs(72, 64, seed));
    if (!why.empty()) return fail(fmt("blob seed %.0f: ", seed) + why);
  }
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    fpx::SynthSpec spec;
    spec.seed = seed;
    spec.random_minutiae = 8;
    spec.angle_deg = 17.0 * seed;
    spec.noise_amplitude = 2.0 * seed;
    if (seed % 2) {
      spec.pattern = fpx::PatternKind::concentric;
      spec.center_x = spec.center_y = 128;
      spec.random_minutiae = 4;
    }
    const auto ex = fpx::extract(fpx::generate(spec).image, "s", fpx::PipelineConfig{});
    if (ex.rejected()) return fail(fmt("synthetic seed %.0f rejected", static_cast<double>(seed)));
    const auto why = skeleton_problem(ex.binary);
    if (!why.empty()) return fail(fmt("synthetic seed %.0f: ", static_cast<double>(seed)) + why);
  }
  return {true, "50 blobs, 20 synthetic prints"};
}

bool near(const fpx::MinutiaeSet& s, fpx::MinutiaKind k, int x, int y, int r) {
  for (const auto& m : s.minutiae) {
    if (m.kind == k && std::abs(m.x - x) <= r && std::abs(m.y - y) <= r) return true;
  }
  return false;
}

Verdict spur_rule() {
  for (int length : {3, 5, 6, 8, 12}) {
    fpx::BinaryImage b(100, 60, 0);
    for (int x = 0; x < 100; ++x) b(x, 20) = 1;
    for (int y = 21; y <= 21 + length; ++y) b(50, y) = 1;
    const auto skel = fpx::thin(b);
    const auto raw = fpx::extract_minutiae(skel);
    if (!near(raw, fpx::MinutiaKind::bifurcation, 50, 21, 1) || !near(raw, fpx::MinutiaKind::ending, 50, 21 + length, 0)) {
      return fail(fmt("length %.0f: fixture lacks its spur minutiae", length));
    }
    const auto post = fpx::postprocess(raw, skel).first;
    const bool bif = near(post, fpx::MinutiaKind::bifurcation, 50, 21, 1);
    const bool end = near(post, fpx::MinutiaKind::ending, 50, 21 + length, 0);
    if (length <= 6 && (bif || end)) return fail(fmt("length %.0f spur survived", length));
    if (length > 6 && !(bif && end)) return fail(fmt("length %.0f spur was removed", length));
  }
  return {true, "3,5,6 removed; 8,12 kept"};
}

Verdict metrics_formulas() {
  for (int i = 0; i < 20; ++i) {
    fpx::MatchResult r;
    r.ground_truth_count = 5 + i;
    r.matched = i % (r.ground_truth_count + 1);
    r.missed = r.ground_truth_count - r.matched;
    r.false_count = (7 * i) % 13;
    r.detected_count = r.matched + r.false_count;
    const auto m = fpx::compute_metrics(r);
    const double gt = 5.0 + i;
    if (std::abs(m.sen - (1.0 - r.missed / gt)) > 1e-12 || std::abs(m.spe - (1.0 - r.false_count / gt)) > 1e-12) {
      return fail(fmt("result %.0f", i));
    }
  }
  const auto agg = fpx::aggregate(std::vector<fpx::Metrics>{{0.7, 1.0}, {0.9, 1.0}});
  if (std::abs(agg.mean_sen - 0.8) > 1e-12 || std::abs(agg.sd_sen - 0.1414) > 1e-4) {
    return fail(fmt("aggregate mean %.6f sd %.6f", agg.mean_sen, agg.sd_sen));
  }
  return {true, fmt("20 results; mean %.4f sd %.4f", agg.mean_sen, agg.sd_sen)};
}

// Ten injected minutiae per image, noise 0..40, alternating parallel and concentric.
void write_corpus(const fs::path& dir) {
  for (int i = 0; i < 20; ++i) {
    fpx::SynthSpec s;
    s.image_id = "c";
    s.seed = 100 + i;
    s.random_minutiae = 10;
    s.noise_amplitude = 40.0 * i / 19;
    if (i % 2) {
      s.pattern = fpx::PatternKind::concentric;
      s.center_x = -60 + 20 * (i % 3);
      s.center_y = 128 + 30 * (i % 4);
    } else {
      s.angle_deg = 17.0 * i;
    }
    fpx::run_synth(s, 1, dir);
  }
}

Verdict end_to_end(const fs::path& corpus, const fs::path& out) {
  fpx::PipelineConfig cfg;
  cfg.output_dir = out;
  cfg.tolerance = 8;
  const auto summary = fpx::run_eval(corpus, corpus, cfg);
  if (!summary.report) return fail("no report");
  const auto& r = *summary.report;
  const std::string d = fmt("n=%.0f SEN %.3f", static_cast<double>(r.n), r.mean_sen) + fmt(" SPE %.3f", r.mean_spe);
  if (r.n != 20 || r.mean_sen < 0.8 || r.mean_spe < 0.8) return fail(d);
  return {true, d};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism(const fs::path& corpus, const fs::path& root) {
  std::vector<std::string> tables;
  for (int workers : {1, 4, 1}) {
    fpx::PipelineConfig cfg;
    cfg.workers = workers;
    cfg.output_dir = root / ("w" + std::to_string(tables.size()));
    const auto s = fpx::run_eval(corpus, corpus, cfg);
    tables.push_back(slurp(s.table_path) + slurp(s.delimited_path));
    for (const auto& e : fs::directory_iterator(cfg.output_dir / "minutiae")) {
      if (slurp(e.path()) != slurp(root / "w0" / "minutiae" / e.path().filename())) {
        return fail("minutiae differ: " + e.path().filename().string());
      }
    }
  }
  if (tables[0] != tables[1] || tables[0] != tables[2]) return fail("reports differ");
  return {true, "workers 1,4,1 byte-identical"};
}

}  // namespace

int main() {
  fpx::testing::TempDir tmp("fpx_acceptance");
  const auto corpus = tmp / "corpus";
  write_corpus(corpus);

  struct Criterion {
    const char* name;
    double limit_s;  // 0: no runtime bound
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"binarize exactness", 1, binarize_exact},
      {"neighbourhood classification, exhaustive", 1, classification_exhaustive},
      {"orientation recovery", 5, orientation_recovery},
      {"frequency recovery", 5, frequency_recovery},
      {"gabor selectivity and denoising", 10, gabor_selectivity_and_denoising},
      {"skeleton invariants", 10, skeleton_invariants},
      {"spur rule", 0, spur_rule},
      {"metrics formulas", 0, metrics_formulas},
      {"end-to-end synthetic corpus", 60, [&] { return end_to_end(corpus, tmp / "e2e"); }},
      {"determinism across worker counts", 0, [&] { return determinism(corpus, tmp / "det"); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (v.ok && c.limit_s > 0 && secs >= c.limit_s) v = fail(v.detail + fmt("; took %.2f s, limit %.0f s", secs, c.limit_s));
    failures += !v.ok;
    std::printf("%s %2zu %-42s %7.2fs  %s\n", v.ok ? "PASS" : "FAIL", i + 1, c.name, secs, v.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures ? 1 : 0;
}
