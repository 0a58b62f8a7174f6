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
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "trayscan/core/model.hpp"
#include "trayscan/core/text_io.hpp"

namespace trayscan::nutrition {

struct VolumeWeight {
  double volume_ml = 0.0;
  double weight_g = 0.0;
};

struct DensityFit {
  double rho = 0.0;
  std::size_t samples = 0;
  double residual_norm = 0.0;
};

/// weight = rho * volume, least squares through the origin.
inline DensityFit fit_density(std::span<const VolumeWeight> samples) {
  double vw = 0.0, vv = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.volume_ml) || !std::isfinite(s.weight_g)) throw ValidationError("fit_density: non-finite sample");
    vw += s.volume_ml * s.weight_g;
    vv += s.volume_ml * s.volume_ml;
  }
  if (!(vv > 0.0)) throw ValidationError("fit_density: all volumes are zero");
  DensityFit fit{vw / vv, samples.size(), 0.0};
  if (!(fit.rho > 0.0)) throw ValidationError("fit_density: fitted density is not positive");
  double r2 = 0.0;
  for (const auto& s : samples) r2 += (s.weight_g - fit.rho * s.volume_ml) * (s.weight_g - fit.rho * s.volume_ml);
  fit.residual_norm = std::sqrt(r2);
  return fit;
}

/// Fitted densities per category, falling back to recipe densities.
class DensityModel {
 public:
  DensityModel() = default;
  explicit DensityModel(const RecipeBook* defaults) : defaults_(defaults) {}

  void set(int category, DensityFit fit) {
    if (!(fit.rho > 0.0)) throw ValidationError("density for category " + std::to_string(category) + " must be positive");
    fits_[category] = fit;
  }

  std::optional<double> find(int category) const {
    if (auto it = fits_.find(category); it != fits_.end()) return it->second.rho;
    if (defaults_) {
      if (const Recipe* r = defaults_->find(category)) return r->density_g_per_ml;
    }
    return std::nullopt;
  }

  double at(int category) const {
    if (auto rho = find(category)) return *rho;
    throw ValidationError("no density for category " + std::to_string(category));
  }

  const std::map<int, DensityFit>& fits() const { return fits_; }

 private:
  std::map<int, DensityFit> fits_;
  const RecipeBook* defaults_ = nullptr;
};

inline DensityModel fit_densities(const std::map<int, std::vector<VolumeWeight>>& samples, const RecipeBook* defaults) {
  DensityModel model(defaults);
  for (const auto& [category, s] : samples) {
    try {
      model.set(category, fit_density(s));
    } catch (const ValidationError&) {
      // degenerate samples: keep the recipe default
    }
  }
  return model;
}

inline double volume_to_weight(double volume_ml, int category, const DensityModel& densities) {
  return densities.at(category) * volume_ml;
}

inline NutrientVector nutrient_content(double weight_g, const Recipe& recipe) {
  if (!(weight_g >= 0.0)) throw ValidationError("nutrient_content: weight must be non-negative");
  return (weight_g / 100.0) * recipe.per_100g;
}

struct MatchedPair {
  std::size_t before = 0;
  std::optional<std::size_t> after;
};

struct ItemMatch {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_after;
};

namespace detail {

inline Eigen::Vector3d match_position(const FoodItem& item) {
  if (item.centroid_mm) return *item.centroid_mm;
  const Eigen::Vector2d c = item.pixel_centroid();
  return {c.x(), c.y(), 0.0};
}

inline int plate_key(const FoodItem& item) { return item.plate ? static_cast<int>(*item.plate) : 0; }

}  // namespace detail

/// Greedy nearest-first pairing inside each (hyper, plate type) bucket.
/// Before-items left without a partner are paired with nothing.
inline ItemMatch match_items(const std::vector<FoodItem>& before, const std::vector<FoodItem>& after) {
  struct Candidate {
    double distance;
    std::size_t b, a;
  };
  std::vector<Candidate> candidates;
  for (std::size_t b = 0; b < before.size(); ++b) {
    for (std::size_t a = 0; a < after.size(); ++a) {
      if (before[b].hyper != after[a].hyper || detail::plate_key(before[b]) != detail::plate_key(after[a])) continue;
      candidates.push_back({(detail::match_position(before[b]) - detail::match_position(after[a])).norm(), b, a});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.distance, x.b, x.a) < std::tie(y.distance, y.b, y.a);
  });
  std::vector<std::optional<std::size_t>> partner(before.size());
  std::vector<bool> taken(after.size(), false);
  for (const auto& c : candidates) {
    if (partner[c.b] || taken[c.a]) continue;
    partner[c.b] = c.a;
    taken[c.a] = true;
  }
  ItemMatch m;
  for (std::size_t b = 0; b < before.size(); ++b) m.pairs.push_back({b, partner[b]});
  for (std::size_t a = 0; a < after.size(); ++a) {
    if (!taken[a]) m.unmatched_after.push_back(a);
  }
  return m;
}

struct IntakeOptions {
  /// Packaged-container hyper category -> hyper whose consumption it follows.
  std::map<Hyper, Hyper> container_links{{Hyper::kSauce, Hyper::kSalad}};
  double default_fraction = 0.5;
};

inline constexpr const char* kMethodGeometry = "geometry";
inline constexpr const char* kMethodHeuristic = "heuristic";
inline constexpr const char* kMethodHeuristicDefault = "heuristic-default";

struct ItemIntake {
  std::size_t before_index = 0;
  std::optional<std::size_t> after_index;
  Hyper hyper = Hyper::kMainCourse;
  std::optional<PlateType> plate;
  int category = 0;
  std::optional<int> after_category;
  bool label_disagreement = false;
  std::optional<int> gt_instance;
  std::string method = kMethodGeometry;
  double before_ml = 0.0;
  double after_ml = 0.0;
  double consumed_ml = 0.0;
  double raw_consumed_ml = 0.0;
  double consumed_fraction = 0.0;
  double density = 0.0;
  double weight_g = 0.0;
  NutrientVector nutrients;
  std::vector<std::string> flags;
};

struct IntakeReport {
  std::string meal_id;
  std::vector<ItemIntake> items;
  NutrientVector total;
  std::size_t unmatched_after = 0;
};

/// Consumed fraction of all geometric items of one hyper category, or nothing
/// when no such item had a positive before-volume.
inline std::optional<double> hyper_consumed_fraction(const std::vector<ItemIntake>& items, Hyper hyper) {
  double consumed = 0.0, served = 0.0;
  for (const auto& it : items) {
    if (it.hyper != hyper || it.method != kMethodGeometry || !(it.before_ml > 0.0)) continue;
    consumed += it.consumed_ml;
    served += it.before_ml;
  }
  if (!(served > 0.0)) return std::nullopt;
  return std::clamp(consumed / served, 0.0, 1.0);
}

inline double packaged_container_intake(const Recipe& recipe, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("container fraction must be in [0, 1]");
  if (!recipe.portion_g) {
    throw ValidationError("recipe " + std::to_string(recipe.category_id) + " has no portion_g for a packaged container");
  }
  return fraction * *recipe.portion_g;
}

/// Consumed weight and nutrients per matched item. Items must carry a
/// category; geometric items use their volume_ml.
inline IntakeReport compute_intake(const std::vector<FoodItem>& before, const std::vector<FoodItem>& after,
                                   const ItemMatch& match, const RecipeBook& recipes, const DensityModel& densities,
                                   const IntakeOptions& opts = {}, const std::string& meal_id = {}) {
  IntakeReport report;
  report.meal_id = meal_id;
  report.unmatched_after = match.unmatched_after.size();
  std::vector<std::size_t> containers;
  for (const auto& pair : match.pairs) {
    const FoodItem& b = before.at(pair.before);
    if (!b.category) throw ValidationError("before item " + std::to_string(pair.before) + " has no category");
    ItemIntake it;
    it.before_index = pair.before;
    it.after_index = pair.after;
    it.hyper = b.hyper;
    it.plate = b.plate;
    it.category = *b.category;
    it.gt_instance = b.gt_instance;
    const Recipe& recipe = recipes.at(it.category);
    if (pair.after) {
      const FoodItem& a = after.at(*pair.after);
      it.after_category = a.category;
      if (a.category && *a.category != it.category) {
        it.label_disagreement = true;
        it.flags.push_back("label-disagreement");
      }
    } else {
      it.flags.push_back("absent-after");
    }
    if (b.plate == PlateType::kPackagedContainer) {
      it.method = kMethodHeuristic;
      containers.push_back(report.items.size());
    } else {
      it.density = densities.at(it.category);
      it.before_ml = b.unusable ? 0.0 : b.volume_ml;
      it.after_ml = pair.after ? after.at(*pair.after).volume_ml : 0.0;
      if (b.unusable) it.flags.push_back("unusable-depth");
      if (pair.after && after.at(*pair.after).unusable) {
        it.after_ml = it.before_ml;
        it.flags.push_back("unusable-depth");
      }
      it.raw_consumed_ml = it.before_ml - it.after_ml;
      it.consumed_ml = std::max(it.raw_consumed_ml, 0.0);
      if (it.raw_consumed_ml < 0.0) it.flags.push_back("negative-consumption-clamped");
      it.consumed_fraction = it.before_ml > 0.0 ? std::clamp(it.consumed_ml / it.before_ml, 0.0, 1.0) : 0.0;
      it.weight_g = it.density * it.consumed_ml;
      it.nutrients = nutrient_content(it.weight_g, recipe);
    }
    report.items.push_back(std::move(it));
  }
  for (std::size_t idx : containers) {
    ItemIntake& it = report.items[idx];
    const Recipe& recipe = recipes.at(it.category);
    std::optional<double> fraction;
    if (auto link = opts.container_links.find(it.hyper); link != opts.container_links.end()) {
      fraction = hyper_consumed_fraction(report.items, link->second);
    }
    if (!fraction) {
      fraction = opts.default_fraction;
      it.method = kMethodHeuristicDefault;
      it.flags.push_back(kMethodHeuristicDefault);
    }
    it.consumed_fraction = *fraction;
    it.weight_g = packaged_container_intake(recipe, *fraction);
    it.nutrients = nutrient_content(it.weight_g, recipe);
  }
  for (const auto& it : report.items) report.total += it.nutrients;
  return report;
}

inline io::Json nutrients_to_json(const NutrientVector& n) {
  io::Json j = io::Json::object();
  for (std::size_t i = 0; i < NutrientVector::kCount; ++i) j[std::string(NutrientVector::kNames[i])] = n[i];
  return j;
}

inline NutrientVector nutrients_from_json(const io::Json& j) {
  NutrientVector n;
  for (std::size_t i = 0; i < NutrientVector::kCount; ++i) n[i] = j.at(std::string(NutrientVector::kNames[i])).get<double>();
  return n;
}

inline io::Json report_to_json(const IntakeReport& r) {
  io::Json items = io::Json::array();
  for (const auto& it : r.items) {
    io::Json j{{"before_index", it.before_index},
               {"hyper", std::string(hyper_name(it.hyper))},
               {"category", it.category},
               {"method", it.method},
               {"before_ml", it.before_ml},
               {"after_ml", it.after_ml},
               {"consumed_ml", it.consumed_ml},
               {"raw_consumed_ml", it.raw_consumed_ml},
               {"consumed_fraction", it.consumed_fraction},
               {"density_g_per_ml", it.density},
               {"weight_g", it.weight_g},
               {"nutrients", nutrients_to_json(it.nutrients)},
               {"flags", it.flags}};
    j["after_index"] = it.after_index ? io::Json(*it.after_index) : io::Json(nullptr);
    j["plate_type"] = it.plate ? io::Json(static_cast<int>(*it.plate)) : io::Json(nullptr);
    j["after_category"] = it.after_category ? io::Json(*it.after_category) : io::Json(nullptr);
    j["gt_instance"] = it.gt_instance ? io::Json(*it.gt_instance) : io::Json(nullptr);
    items.push_back(std::move(j));
  }
  return {{"meal_id", r.meal_id},
          {"items", items},
          {"total", nutrients_to_json(r.total)},
          {"unmatched_after", r.unmatched_after}};
}

inline const std::string kIntakeCsvHeader = "meal_id,kcal,cho_g,fat_g,protein_g,salt_g,fiber_g";

inline std::string intake_csv_row(const std::string& meal_id, const NutrientVector& n) {
  std::ostringstream out;
  out << meal_id;
  for (std::size_t i = 0; i < NutrientVector::kCount; ++i) out << ',' << io::format_double(n[i]);
  return out.str();
}

/// meal id -> nutrient totals, from the CSV summary format.
inline std::map<std::string, NutrientVector> parse_intake_csv(const std::string& text, const std::string& name) {
  const io::CsvTable table = io::parse_csv(text, name);
  if (table.header != io::split_csv_line(kIntakeCsvHeader)) {
    throw ValidationError(name + ": expected header '" + kIntakeCsvHeader + "'");
  }
  std::map<std::string, NutrientVector> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = name + ":" + std::to_string(table.line_numbers[r]);
    if (row.size() != 1 + NutrientVector::kCount) throw ValidationError(where + ": expected 7 columns");
    NutrientVector n;
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) n[i] = io::parse_double(row[i + 1], where);
    if (!out.emplace(row[0], n).second) throw ValidationError(where + ": duplicate meal id " + row[0]);
  }
  return out;
}

}  // namespace trayscan::nutrition
