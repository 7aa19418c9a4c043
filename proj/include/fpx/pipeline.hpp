#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "fpx/binthin.hpp"
#include "fpx/config.hpp"
#include "fpx/enhance.hpp"
#include "fpx/eval.hpp"
#include "fpx/image.hpp"
#include "fpx/minutiae.hpp"
#include "fpx/pgm.hpp"
#include "fpx/synth.hpp"

namespace fpx {

/// Every tunable of the extraction and evaluation pipeline.
struct PipelineConfig {
  double target_mean = kDefaultTargetMean;
  double target_variance = kDefaultTargetVariance;
  int block_size = kDefaultBlockSize;
  double smooth_sigma = kDefaultSmoothSigma;
  int frequency_window = kDefaultFrequencyWindow;
  GaborParams gabor;
  MaskParams mask;
  std::optional<int> fixed_threshold;  // nullopt: mean over recoverable pixels
  PostprocessParams post;
  double tolerance = kDefaultMatchTolerance;
  bool dump_intermediates = false;
  int workers = 1;
  std::filesystem::path output_dir = ".";

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (!(target_variance > 0.0)) fail("target_variance must be > 0");
    if (block_size < 4) fail("block_size must be >= 4");
    if (smooth_sigma < 0.0) fail("smooth_sigma must be >= 0");
    if (frequency_window < 3) fail("frequency_window must be >= 3");
    if (!(gabor.sigma_x > 0.0) || !(gabor.sigma_y > 0.0)) fail("sigma_x and sigma_y must be > 0");
    if (!(mask.reject_threshold >= 0.0 && mask.reject_threshold <= 1.0)) {
      fail("reject_threshold must be in [0, 1]");
    }
    if (mask.coherence_floor < 0.0 || mask.coherence_floor > 1.0) fail("coherence_floor must be in [0, 1]");
    if (mask.variance_floor < 0.0) fail("variance_floor must be >= 0");
    if (fixed_threshold && (*fixed_threshold < 0 || *fixed_threshold > 255)) {
      fail("threshold must be 'auto' or in [0, 255]");
    }
    if (post.adjacency_window < 0 || post.border_distance < 0 || post.reconnect_gap < 0 ||
        post.spur_length < 0) {
      fail("postprocess distances must be >= 0");
    }
    if (!(tolerance > 0.0)) fail("tolerance must be > 0");
    if (workers < 1) fail("workers must be >= 1");
  }

  /// Parameters that influence results, in a fixed order. Execution settings
  /// (workers, output directory, dumps) are not part of the echo.
  std::vector<std::pair<std::string, std::string>> echo() const {
    auto num = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", v);
      return std::string(buf);
    };
    return {
        {"target_mean", num(target_mean)},
        {"target_variance", num(target_variance)},
        {"block_size", std::to_string(block_size)},
        {"smooth_sigma", num(smooth_sigma)},
        {"frequency_window", std::to_string(frequency_window)},
        {"sigma_x", num(gabor.sigma_x)},
        {"sigma_y", num(gabor.sigma_y)},
        {"reject_threshold", num(mask.reject_threshold)},
        {"coherence_floor", num(mask.coherence_floor)},
        {"variance_floor", num(mask.variance_floor)},
        {"threshold", fixed_threshold ? std::to_string(*fixed_threshold) : std::string("auto")},
        {"adjacency_window", std::to_string(post.adjacency_window)},
        {"border_distance", std::to_string(post.border_distance)},
        {"reconnect_gap", std::to_string(post.reconnect_gap)},
        {"spur_length", std::to_string(post.spur_length)},
        {"tolerance", num(tolerance)},
    };
  }
};

inline std::optional<int> parse_threshold(const std::string& text) {
  if (text == "auto") return std::nullopt;
  const int t = parse_value<int>("threshold", text);
  if (t < 0 || t > 255) throw ConfigError("threshold must be 'auto' or in [0, 255]");
  return t;
}

/// Applies the keys of a config file on top of `cfg`.
inline PipelineConfig apply_config(const KeyValueFile& kv, PipelineConfig cfg = {}) {
  for (const auto& [key, value] : kv.entries()) {
    if (key == "target_mean") cfg.target_mean = parse_value<double>(key, value);
    else if (key == "target_variance") cfg.target_variance = parse_value<double>(key, value);
    else if (key == "block_size") cfg.block_size = parse_value<int>(key, value);
    else if (key == "smooth_sigma") cfg.smooth_sigma = parse_value<double>(key, value);
    else if (key == "frequency_window") cfg.frequency_window = parse_value<int>(key, value);
    else if (key == "sigma_x") cfg.gabor.sigma_x = parse_value<double>(key, value);
    else if (key == "sigma_y") cfg.gabor.sigma_y = parse_value<double>(key, value);
    else if (key == "reject_threshold") cfg.mask.reject_threshold = parse_value<double>(key, value);
    else if (key == "coherence_floor") cfg.mask.coherence_floor = parse_value<double>(key, value);
    else if (key == "variance_floor") cfg.mask.variance_floor = parse_value<double>(key, value);
    else if (key == "threshold") cfg.fixed_threshold = parse_threshold(value);
    else if (key == "adjacency_window") cfg.post.adjacency_window = parse_value<int>(key, value);
    else if (key == "border_distance") cfg.post.border_distance = parse_value<int>(key, value);
    else if (key == "reconnect_gap") cfg.post.reconnect_gap = parse_value<int>(key, value);
    else if (key == "spur_length") cfg.post.spur_length = parse_value<int>(key, value);
    else if (key == "tolerance") cfg.tolerance = parse_value<double>(key, value);
    else if (key == "dump_intermediates") cfg.dump_intermediates = parse_value<bool>(key, value);
    else if (key == "workers") cfg.workers = parse_value<int>(key, value);
    else if (key == "output_dir") cfg.output_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return cfg;
}

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything the pipeline computed for one image. Stages after a rejection
/// are left empty.
struct Extraction {
  std::variant<MinutiaeSet, Rejection> outcome;
  OrientationField orientation;
  FrequencyMap frequency;
  std::optional<RegionMask> mask;
  GrayImage enhanced;
  int threshold = 0;
  BinaryImage binary;
  Skeleton raw_skeleton;
  Skeleton skeleton;  // after postprocessing
  MinutiaeSet raw;

  bool rejected() const { return std::holds_alternative<Rejection>(outcome); }
};

/// normalize -> orientation -> frequency -> region mask -> Gabor ->
/// invert -> binarize -> thin -> extract -> postprocess.
inline Extraction extract(const GrayImage& img, const std::string& image_id, const PipelineConfig& cfg) {
  cfg.validate();
  if (img.width() < 32 || img.height() < 32) {
    throw InputError(image_id + ": image must be at least 32x32 pixels");
  }
  Extraction ex;
  const auto norm = normalize(img, cfg.target_mean, cfg.target_variance);
  ex.orientation = estimate_orientation(norm, cfg.block_size, cfg.smooth_sigma);
  ex.frequency = estimate_frequency(norm, ex.orientation, cfg.frequency_window);
  auto mask = compute_region_mask(norm, ex.orientation, ex.frequency, cfg.mask);
  if (auto* rej = std::get_if<Rejection>(&mask)) {
    ex.outcome = *rej;
    return ex;
  }
  ex.mask = std::get<RegionMask>(std::move(mask));
  ex.enhanced = gabor_enhance(norm, ex.orientation, ex.frequency, *ex.mask, cfg.gabor);

  // Ridges are dark after enhancement; invert so that ridge pixels bind to 1.
  const auto ridges_bright = invert(ex.enhanced);
  const auto params = cfg.fixed_threshold ? BinarizeParams::fixed(*cfg.fixed_threshold)
                                          : auto_threshold(ridges_bright, *ex.mask);
  ex.threshold = params.threshold;
  ex.binary = binarize(ridges_bright, params);
  Grid<std::uint8_t> region(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (ex.mask->recoverable_pixel(x, y)) {
        region(x, y) = 1;
      } else {
        ex.binary(x, y) = 0;
      }
    }
  }

  ex.raw_skeleton = thin(ex.binary);
  ex.raw = extract_minutiae(ex.raw_skeleton, image_id);
  auto [set, skel] = postprocess(ex.raw, ex.raw_skeleton, cfg.post, &region);
  ex.skeleton = std::move(skel);
  ex.outcome = std::move(set);
  return ex;
}

inline void write_minutiae_file(const std::filesystem::path& path, const MinutiaeSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  write_minutiae(out, set);
  if (!out) throw InputError(path.string() + ": write failed");
}

inline MinutiaeSet read_minutiae_file(const std::filesystem::path& path,
                                      Provenance provenance = Provenance::ground_truth) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open minutiae file");
  try {
    return read_minutiae(in, provenance);
  } catch (const MinutiaeFormatError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

/// The five intermediate artifacts written with `dump_intermediates`.
inline std::vector<std::filesystem::path> write_intermediates(const Extraction& ex,
                                                              const std::filesystem::path& dir,
                                                              const std::string& stem) {
  std::vector<std::filesystem::path> written;
  auto text = [&](const std::string& suffix, auto&& writer) {
    const auto p = dir / (stem + suffix);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError(p.string() + ": cannot open for writing");
    writer(out);
    written.push_back(p);
  };
  text(".orientation.txt", [&](std::ostream& os) { write_orientation_grid(os, ex.orientation); });
  text(".frequency.txt", [&](std::ostream& os) { write_frequency_grid(os, ex.frequency); });
  save_pgm(ex.enhanced, dir / (stem + ".enhanced.pgm"));
  written.push_back(dir / (stem + ".enhanced.pgm"));
  save_pgm(ex.binary, dir / (stem + ".binary.pgm"));
  written.push_back(dir / (stem + ".binary.pgm"));
  save_pgm(ex.skeleton, dir / (stem + ".skeleton.pgm"));
  written.push_back(dir / (stem + ".skeleton.pgm"));
  return written;
}

struct ExtractReport {
  std::variant<std::filesystem::path, Rejection> outcome;  // minutiae file or rejection
  std::vector<std::filesystem::path> intermediates;
};

/// Runs the pipeline on one PGM and writes `<out>/<stem>.min`.
inline ExtractReport run_extract(const std::filesystem::path& image_path, const PipelineConfig& cfg) {
  cfg.validate();
  GrayImage img;
  try {
    img = load_pgm(image_path);
  } catch (const PgmError& e) {
    throw InputError(e.what());
  }
  const std::string stem = image_path.stem().string();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw InputError(cfg.output_dir.string() + ": cannot create output directory");

  const auto ex = extract(img, stem, cfg);
  ExtractReport report;
  if (const auto* rej = std::get_if<Rejection>(&ex.outcome)) {
    report.outcome = *rej;
    return report;
  }
  const auto path = cfg.output_dir / (stem + ".min");
  write_minutiae_file(path, std::get<MinutiaeSet>(ex.outcome));
  report.outcome = path;
  if (cfg.dump_intermediates) report.intermediates = write_intermediates(ex, cfg.output_dir, stem);
  return report;
}

/// Produces detections for one image: a minutiae set or a rejection.
using Extractor = std::function<std::variant<MinutiaeSet, Rejection>(
    const std::filesystem::path& image, const std::string& image_id, const PipelineConfig& cfg)>;

inline std::variant<MinutiaeSet, Rejection> pipeline_extractor(const std::filesystem::path& image,
                                                               const std::string& image_id,
                                                               const PipelineConfig& cfg) {
  GrayImage img;
  try {
    img = load_pgm(image);
  } catch (const PgmError& e) {
    throw InputError(e.what());
  }
  return extract(img, image_id, cfg).outcome;
}

struct EvalSummary {
  std::optional<AggregateReport> report;
  std::vector<MatchResult> results;                             // parallel to report->per_image
  std::vector<std::pair<std::string, Rejection>> rejected;
  std::vector<std::pair<std::string, std::string>> errors;      // image id, message
  std::filesystem::path table_path;
  std::filesystem::path delimited_path;
};

namespace detail {

struct ImageOutcome {
  std::string id;
  std::optional<MatchResult> result;
  std::optional<Metrics> metrics;
  std::optional<Rejection> rejection;
  std::optional<std::string> error;
};

inline void write_config_echo(std::ostream& os, const PipelineConfig& cfg) {
  for (const auto& [k, v] : cfg.echo()) os << "# " << k << '=' << v << '\n';
}

}  // namespace detail

/// Extracts, matches and scores every `*.pgm` in `dataset_dir` against the
/// same-stem `.min` file in `truth_dir`. Writes per-image detections to
/// `<out>/minutiae/` and the reports `<out>/report.txt` (table) and
/// `<out>/report.tsv` (delimited). Images are processed by up to
/// `cfg.workers` threads; reports are written in image-id order.
inline EvalSummary run_eval(const std::filesystem::path& dataset_dir, const std::filesystem::path& truth_dir,
                            const PipelineConfig& cfg, const Extractor& extractor = pipeline_extractor) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (!fs::is_directory(dataset_dir)) throw InputError(dataset_dir.string() + ": not a directory");

  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw InputError(dataset_dir.string() + ": no .pgm images found");

  std::error_code ec;
  const fs::path min_dir = cfg.output_dir / "minutiae";
  fs::create_directories(min_dir, ec);
  if (ec) throw InputError(cfg.output_dir.string() + ": cannot create output directory");

  std::vector<detail::ImageOutcome> outcomes(images.size());
  auto process = [&](std::size_t i) {
    auto& o = outcomes[i];
    o.id = images[i].stem().string();
    try {
      const fs::path truth_path = truth_dir / (o.id + ".min");
      if (!fs::exists(truth_path)) throw InputError("missing truth file " + truth_path.string());
      auto truth = read_minutiae_file(truth_path);
      if (truth.image_id != o.id) {
        throw InputError("truth file image id '" + truth.image_id + "' does not match '" + o.id + "'");
      }
      auto detected = extractor(images[i], o.id, cfg);
      if (auto* rej = std::get_if<Rejection>(&detected)) {
        o.rejection = *rej;
        return;
      }
      const auto& set = std::get<MinutiaeSet>(detected);
      write_minutiae_file(min_dir / (o.id + ".min"), set);
      o.result = match_minutiae(set, truth, cfg.tolerance);
      o.metrics = compute_metrics(*o.result);
    } catch (const std::exception& e) {
      o.result.reset();
      o.metrics.reset();
      o.error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), images.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < images.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < images.size(); i = next++) process(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  EvalSummary summary;
  std::vector<ImageMetrics> metrics;
  for (const auto& o : outcomes) {
    if (o.error) {
      summary.errors.emplace_back(o.id, *o.error);
    } else if (o.rejection) {
      summary.rejected.emplace_back(o.id, *o.rejection);
    } else {
      metrics.push_back({o.id, *o.metrics});
      summary.results.push_back(*o.result);
    }
  }
  if (!metrics.empty()) summary.report = aggregate(std::move(metrics));

  summary.table_path = cfg.output_dir / "report.txt";
  summary.delimited_path = cfg.output_dir / "report.tsv";
  char buf[160];
  {
    std::ofstream os(summary.table_path, std::ios::binary);
    if (!os) throw InputError(summary.table_path.string() + ": cannot open for writing");
    os << "# minutiae extraction evaluation\n";
    detail::write_config_echo(os, cfg);
    std::snprintf(buf, sizeof buf, "# images: %zu evaluated, %zu rejected, %zu errors\n",
                  summary.report ? summary.report->n : 0, summary.rejected.size(), summary.errors.size());
    os << buf << '\n';
    if (summary.report) {
      write_summary_table(os, *summary.report);
    } else {
      os << "no images evaluated\n";
    }
    if (!summary.rejected.empty()) {
      os << "\nrejected:\n";
      for (const auto& [id, r] : summary.rejected) {
        std::snprintf(buf, sizeof buf, "  %s recoverable_fraction=%.4f threshold=%.4f\n", id.c_str(),
                      r.recoverable_fraction, r.threshold);
        os << buf;
      }
    }
    if (!summary.errors.empty()) {
      os << "\nerrors:\n";
      for (const auto& [id, msg] : summary.errors) os << "  " << id << ": " << msg << '\n';
    }
  }
  {
    std::ofstream os(summary.delimited_path, std::ios::binary);
    if (!os) throw InputError(summary.delimited_path.string() + ": cannot open for writing");
    detail::write_config_echo(os, cfg);
    if (summary.report) write_delimited(os, *summary.report, summary.results);
    for (const auto& [id, r] : summary.rejected) {
      std::snprintf(buf, sizeof buf, "#rejected\t%s\t%.6f\n", id.c_str(), r.recoverable_fraction);
      os << buf;
    }
    for (const auto& [id, msg] : summary.errors) os << "#error\t" << id << '\t' << msg << '\n';
  }
  return summary;
}

/// Writes `count` images and truth files with seeds base .. base + count - 1,
/// named `<image_id>_<seed>`. Every image is generated before anything is
/// written, so an invalid spec leaves the directory untouched.
inline std::vector<std::filesystem::path> run_synth(const SynthSpec& spec, int count,
                                                    const std::filesystem::path& out_dir) {
  if (count < 1) throw InputError("synth: count must be >= 1");
  validate(spec);
  std::vector<std::pair<std::string, SynthImage>> corpus;
  for (int i = 0; i < count; ++i) {
    SynthSpec s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    s.image_id = spec.image_id + "_" + std::to_string(s.seed);
    corpus.emplace_back(s.image_id, generate(s));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError(out_dir.string() + ": cannot create output directory");
  std::vector<std::filesystem::path> written;
  for (const auto& [id, synth] : corpus) {
    try {
      save_pgm(synth.image, out_dir / (id + ".pgm"));
    } catch (const PgmError& e) {
      throw InputError(e.what());
    }
    write_minutiae_file(out_dir / (id + ".min"), synth.truth);
    written.push_back(out_dir / (id + ".pgm"));
  }
  return written;
}

}  // namespace fpx
