#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fpx/minutiae.hpp"

namespace fpx {

inline constexpr double kDefaultMatchTolerance = 8.0;

struct MatchPair {
  std::size_t detected = 0;
  std::size_t truth = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::string image_id;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t false_count = 0;
  std::size_t ground_truth_count = 0;
  std::size_t detected_count = 0;
  double tolerance = 0.0;
  std::vector<MatchPair> pairs;
};

struct Metrics {
  double sen = 0.0;
  double spe = 0.0;  // may be negative when false detections exceed the ground truth
};

struct ImageMetrics {
  std::string image_id;
  Metrics metrics;
};

struct AggregateReport {
  std::vector<ImageMetrics> per_image;
  double mean_sen = 0.0;
  double mean_spe = 0.0;
  double sd_sen = 0.0;  // sample SD, divisor n - 1
  double sd_spe = 0.0;
  std::size_t n = 0;
};

/// One-to-one greedy pairing by ascending Euclidean distance, ignoring
/// minutia kind. Ties break on (detected index, truth index).
inline MatchResult match_minutiae(const MinutiaeSet& detected, const MinutiaeSet& truth,
                                  double tolerance = kDefaultMatchTolerance) {
  if (detected.image_id != truth.image_id) {
    throw std::invalid_argument("match_minutiae: image id mismatch ('" + detected.image_id +
                                "' vs '" + truth.image_id + "')");
  }
  if (!(tolerance > 0.0)) throw std::invalid_argument("match_minutiae: tolerance must be positive");

  std::vector<MatchPair> candidates;
  for (std::size_t i = 0; i < detected.minutiae.size(); ++i) {
    for (std::size_t j = 0; j < truth.minutiae.size(); ++j) {
      const auto& d = detected.minutiae[i];
      const auto& t = truth.minutiae[j];
      const double dist = std::hypot(d.x - t.x, d.y - t.y);
      if (dist <= tolerance) candidates.push_back({i, j, dist});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
    return std::tie(a.distance, a.detected, a.truth) < std::tie(b.distance, b.detected, b.truth);
  });

  std::vector<bool> det_used(detected.minutiae.size(), false);
  std::vector<bool> truth_used(truth.minutiae.size(), false);
  MatchResult r;
  r.image_id = detected.image_id;
  r.tolerance = tolerance;
  r.ground_truth_count = truth.minutiae.size();
  r.detected_count = detected.minutiae.size();
  for (const auto& c : candidates) {
    if (det_used[c.detected] || truth_used[c.truth]) continue;
    det_used[c.detected] = truth_used[c.truth] = true;
    r.pairs.push_back(c);
  }
  r.matched = r.pairs.size();
  r.missed = r.ground_truth_count - r.matched;
  r.false_count = r.detected_count - r.matched;
  return r;
}

/// SEN = 1 - missed / GT, SPE = 1 - false / GT.
inline Metrics compute_metrics(const MatchResult& result) {
  if (result.ground_truth_count == 0) {
    throw std::invalid_argument("compute_metrics: ground truth is empty for '" + result.image_id + "'");
  }
  const double gt = static_cast<double>(result.ground_truth_count);
  return {1.0 - static_cast<double>(result.missed) / gt,
          1.0 - static_cast<double>(result.false_count) / gt};
}

/// Arithmetic mean and sample standard deviation; SD is 0 for one image.
inline AggregateReport aggregate(std::vector<ImageMetrics> per_image) {
  if (per_image.empty()) throw std::invalid_argument("aggregate: no images");
  AggregateReport rep;
  rep.n = per_image.size();
  const double n = static_cast<double>(rep.n);
  double ssen = 0.0, sspe = 0.0;
  for (const auto& m : per_image) {
    ssen += m.metrics.sen;
    sspe += m.metrics.spe;
  }
  rep.mean_sen = ssen / n;
  rep.mean_spe = sspe / n;
  if (rep.n > 1) {
    double vsen = 0.0, vspe = 0.0;
    for (const auto& m : per_image) {
      vsen += (m.metrics.sen - rep.mean_sen) * (m.metrics.sen - rep.mean_sen);
      vspe += (m.metrics.spe - rep.mean_spe) * (m.metrics.spe - rep.mean_spe);
    }
    rep.sd_sen = std::sqrt(vsen / (n - 1.0));
    rep.sd_spe = std::sqrt(vspe / (n - 1.0));
  }
  rep.per_image = std::move(per_image);
  return rep;
}

inline AggregateReport aggregate(const std::vector<Metrics>& metrics) {
  std::vector<ImageMetrics> tagged;
  tagged.reserve(metrics.size());
  for (std::size_t i = 0; i < metrics.size(); ++i) tagged.push_back({std::to_string(i), metrics[i]});
  return aggregate(std::move(tagged));
}

/// Mean/SD table in percent: rows Mean and SD, columns SEN and SPE.
inline void write_summary_table(std::ostream& os, const AggregateReport& rep) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-6s %9s %9s\n", "", "SEN", "SPE");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-6s %9.2f %9.2f\n", "Mean", 100.0 * rep.mean_sen, 100.0 * rep.mean_spe);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-6s %9.2f %9.2f\n", "SD", 100.0 * rep.sd_sen, 100.0 * rep.sd_spe);
  os << buf;
}

/// Tab-separated rows: one per image, then `mean` and `sd` summary rows.
/// `results` must be in the same order as `rep.per_image`.
inline void write_delimited(std::ostream& os, const AggregateReport& rep,
                            const std::vector<MatchResult>& results) {
  os << "image_id\tmatched\tmissed\tfalse\ttruth\tdetected\tsen\tspe\tflag\n";
  char buf[256];
  for (std::size_t i = 0; i < rep.per_image.size(); ++i) {
    const auto& m = rep.per_image[i];
    const MatchResult* r = i < results.size() ? &results[i] : nullptr;
    std::snprintf(buf, sizeof buf, "\t%zu\t%zu\t%zu\t%zu\t%zu\t%.6f\t%.6f\t%s\n",
                  r ? r->matched : 0, r ? r->missed : 0, r ? r->false_count : 0,
                  r ? r->ground_truth_count : 0, r ? r->detected_count : 0, m.metrics.sen,
                  m.metrics.spe, m.metrics.spe < 0.0 ? "negative_spe" : "");
    os << m.image_id << buf;
  }
  std::snprintf(buf, sizeof buf, "mean\t\t\t\t\t\t%.6f\t%.6f\t\n", rep.mean_sen, rep.mean_spe);
  os << buf;
  std::snprintf(buf, sizeof buf, "sd\t\t\t\t\t\t%.6f\t%.6f\t\n", rep.sd_sen, rep.sd_spe);
  os << buf;
}

}  // namespace fpx
