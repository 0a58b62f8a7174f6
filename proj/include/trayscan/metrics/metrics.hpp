// Copyright 2026 The Trayscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "trayscan/core/items.hpp"
#include "trayscan/core/taxonomy.hpp"
#include "trayscan/core/text_io.hpp"

namespace trayscan::metrics {

namespace detail {

inline void check_same_shape(const LabelMap& a, const LabelMap& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("label maps differ in size: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                          " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

}  // namespace detail

/// |pred ∩ gt| / |pred ∪ gt| for one label; nothing when the union is empty.
inline std::optional<double> iou(const LabelMap& pred, const LabelMap& gt, int category) {
  detail::check_same_shape(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred.data()[i] == category, g = gt.data()[i] == category;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Fraction of ground-truth food pixels (label > 0) whose predicted label matches.
inline double pixel_accuracy(const LabelMap& pred, const LabelMap& gt) {
  detail::check_same_shape(pred, gt);
  std::size_t food = 0, hit = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.data()[i] == 0) continue;
    ++food;
    hit += pred.data()[i] == gt.data()[i];
  }
  if (food == 0) throw ValidationError("pixel_accuracy: ground truth has no food pixels");
  return static_cast<double>(hit) / static_cast<double>(food);
}

struct RegionFScores {
  double f_min = 0.0;
  /// Area-weighted mean over ground-truth regions.
  double f_sum = 0.0;
  std::size_t regions = 0;
};

/// Per ground-truth region: F1 between the region and the union of predicted
/// components with the same label that touch it.
inline RegionFScores region_fscores(const LabelMap& pred, const LabelMap& gt) {
  detail::check_same_shape(pred, gt);
  const auto gt_regions = connected_components(gt, 1);
  if (gt_regions.empty()) throw ValidationError("region_fscores: ground truth has no food regions");
  const auto pred_regions = connected_components(pred, 1);
  std::vector<int> component(pred.size(), -1);
  for (std::size_t c = 0; c < pred_regions.size(); ++c) {
    for (const auto& p : pred_regions[c].region) component[static_cast<std::size_t>(p.v) * pred.width() + p.u] = static_cast<int>(c);
  }
  RegionFScores out;
  out.f_min = std::numeric_limits<double>::infinity();
  double weighted = 0.0, area = 0.0;
  for (const auto& g : gt_regions) {
    std::vector<int> touching;
    std::size_t inter = 0;
    for (const auto& p : g.region) {
      const int c = component[static_cast<std::size_t>(p.v) * pred.width() + p.u];
      if (c < 0 || pred_regions[c].label != g.label) continue;
      ++inter;
      if (std::find(touching.begin(), touching.end(), c) == touching.end()) touching.push_back(c);
    }
    std::size_t predicted = 0;
    for (int c : touching) predicted += pred_regions[c].region.size();
    const double f1 = 2.0 * static_cast<double>(inter) / static_cast<double>(predicted + g.region.size());
    out.f_min = std::min(out.f_min, f1);
    weighted += f1 * static_cast<double>(g.region.size());
    area += static_cast<double>(g.region.size());
  }
  out.f_sum = weighted / area;
  out.regions = gt_regions.size();
  return out;
}

struct SegmentationScore {
  std::map<Hyper, double> iou;
  double mean_iou = 0.0;
  double pixel_accuracy = 0.0;
  RegionFScores fscores;
};

/// mIoU averages the hyper categories present in the ground truth.
inline SegmentationScore score_segmentation(const LabelMap& pred, const LabelMap& gt) {
  SegmentationScore s;
  std::vector<bool> present(kHyperCount + 1, false);
  for (auto v : gt.data()) {
    if (v > 0 && v <= kHyperCount) present[v] = true;
  }
  double sum = 0.0;
  for (Hyper h : kAllHypers) {
    if (!present[static_cast<int>(h)]) continue;
    s.iou[h] = *iou(pred, gt, static_cast<int>(h));
    sum += s.iou[h];
  }
  s.mean_iou = s.iou.empty() ? 0.0 : sum / static_cast<double>(s.iou.size());
  s.pixel_accuracy = pixel_accuracy(pred, gt);
  s.fscores = region_fscores(pred, gt);
  return s;
}

/// Two-sided p-value of Student's t with `dof` degrees of freedom. With
/// t = sqrt(dof) tan(theta), P(|T| > |t|) is the integral of cos^(dof-1)
/// from theta_0 to pi/2 over its integral from 0 to pi/2, which is
/// B(1/2, dof/2) / 2. The tail integral uses composite Simpson.
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw ValidationError("student_t: degrees of freedom must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double theta0 = std::atan(std::abs(t) / std::sqrt(dof));
  const double half_pi = std::numbers::pi / 2.0;
  if (theta0 >= half_pi) return 0.0;
  const int n = 4096;
  const double h = (half_pi - theta0) / n;
  auto f = [&](double th) {
    const double c = std::cos(th);
    return c <= 0.0 ? (dof == 1.0 ? 1.0 : 0.0) : std::exp((dof - 1.0) * std::log(c));
  };
  double acc = f(theta0) + f(half_pi);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(theta0 + i * h);
  const double tail = acc * h / 3.0;
  const double log_beta = std::lgamma(0.5) + std::lgamma(dof / 2.0) - std::lgamma(0.5 + dof / 2.0);
  return std::clamp(2.0 * tail * std::exp(-log_beta), 0.0, 1.0);
}

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
};

/// Product-moment correlation; nothing when either sequence is constant.
inline std::optional<Correlation> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (x.size() < 3) throw ValidationError("pearson: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = n - 2.0;
  const double denom = 1.0 - c.r * c.r;
  c.p_value = denom <= 0.0 ? 0.0 : student_t_two_sided_p(c.r * std::sqrt(dof / denom), dof);
  return c;
}

struct AgreementStats {
  std::size_t n = 0;
  double mae = 0.0;
  double mae_sd = 0.0;
  double mre_pct = 0.0;
  std::size_t mre_count = 0;
  std::size_t mre_skipped = 0;
  std::optional<Correlation> correlation;
  double bias = 0.0;
  double diff_sd = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
};

inline double sample_sd(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// MAE with sample SD, MRE over nonzero truths, Pearson r (3+ points) and
/// Bland-Altman bias with 95% limits of agreement.
inline AgreementStats agreement(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ValidationError("agreement: length mismatch");
  if (pred.empty()) throw ValidationError("agreement: no values");
  AgreementStats s;
  s.n = pred.size();
  std::vector<double> abs_err, diff, rel;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    diff.push_back(d);
    abs_err.push_back(std::abs(d));
    if (gt[i] != 0.0) {
      rel.push_back(std::abs(d) / std::abs(gt[i]));
    } else {
      ++s.mre_skipped;
    }
  }
  s.mae = mean_of(abs_err);
  s.mae_sd = sample_sd(abs_err, s.mae);
  s.mre_count = rel.size();
  s.mre_pct = rel.empty() ? 0.0 : 100.0 * mean_of(rel);
  if (pred.size() >= 3) s.correlation = pearson(pred, gt);
  s.bias = mean_of(diff);
  s.diff_sd = sample_sd(diff, s.bias);
  s.loa_low = s.bias - 1.96 * s.diff_sd;
  s.loa_high = s.bias + 1.96 * s.diff_sd;
  return s;
}

struct RecognitionAccuracy {
  std::map<Hyper, double> per_hyper;
  std::map<Hyper, std::size_t> counts;
  /// Unweighted mean over hyper categories that have samples.
  double mean = 0.0;
  double overall = 0.0;
};

inline RecognitionAccuracy recognition_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                                std::span<const Hyper> hypers) {
  if (predicted.size() != truth.size() || truth.size() != hypers.size()) {
    throw ValidationError("recognition_accuracy: sequences differ in length");
  }
  if (truth.empty()) throw ValidationError("recognition_accuracy: no samples");
  RecognitionAccuracy out;
  std::map<Hyper, std::size_t> hits;
  std::size_t all_hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++out.counts[hypers[i]];
    if (predicted[i] == truth[i]) {
      ++hits[hypers[i]];
      ++all_hits;
    }
  }
  double sum = 0.0;
  for (const auto& [h, n] : out.counts) {
    out.per_hyper[h] = 100.0 * static_cast<double>(hits[h]) / static_cast<double>(n);
    sum += out.per_hyper[h];
  }
  out.mean = sum / static_cast<double>(out.counts.size());
  out.overall = 100.0 * static_cast<double>(all_hits) / static_cast<double>(truth.size());
  return out;
}

inline const std::string kAgreementCsvHeader =
    "nutrient,n,mae,mae_sd,mre_pct,mre_count,mre_skipped,pearson_r,p_value,bias,diff_sd,loa_low,loa_high";

inline std::string agreement_csv_row(const std::string& label, const AgreementStats& s) {
  std::ostringstream out;
  auto f = [](double v) { return io::format_double(v); };
  out << label << ',' << s.n << ',' << f(s.mae) << ',' << f(s.mae_sd) << ',' << f(s.mre_pct) << ',' << s.mre_count
      << ',' << s.mre_skipped << ',' << (s.correlation ? f(s.correlation->r) : "") << ','
      << (s.correlation ? f(s.correlation->p_value) : "") << ',' << f(s.bias) << ',' << f(s.diff_sd) << ','
      << f(s.loa_low) << ',' << f(s.loa_high);
  return out.str();
}

/// Bland-Altman points: one `gt,diff` row per observation.
inline std::string bland_altman_csv(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ValidationError("bland_altman: length mismatch");
  std::ostringstream out;
  out << "gt,diff\n";
  for (std::size_t i = 0; i < gt.size(); ++i) out << io::format_double(gt[i]) << ',' << io::format_double(pred[i] - gt[i]) << '\n';
  return out.str();
}

}  // namespace trayscan::metrics
