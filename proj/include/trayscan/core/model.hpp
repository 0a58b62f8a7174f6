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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/taxonomy.hpp"
#include "trayscan/core/types.hpp"

namespace trayscan {

/// Per-100 g nutrient table entry for one fine-grained category.
struct Recipe {
  int category_id = 0;
  Hyper hyper = Hyper::kMainCourse;
  NutrientVector per_100g;
  double density_g_per_ml = 1.0;
  /// Served portion, used for packaged containers whose contents are not visible.
  std::optional<double> portion_g;

  void validate() const {
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) {
      if (!(per_100g[i] >= 0.0)) {
        throw ValidationError("recipe " + std::to_string(category_id) + ": negative " +
                              std::string(NutrientVector::kNames[i]));
      }
    }
    if (!(density_g_per_ml > 0.0)) {
      throw ValidationError("recipe " + std::to_string(category_id) + ": density must be positive");
    }
    if (portion_g && !(*portion_g >= 0.0)) {
      throw ValidationError("recipe " + std::to_string(category_id) + ": negative portion");
    }
  }
};

class RecipeBook {
 public:
  void add(Recipe r) {
    r.validate();
    taxonomy_.add(r.category_id, r.hyper);
    recipes_[r.category_id] = std::move(r);
  }

  const Recipe* find(int category_id) const {
    auto it = recipes_.find(category_id);
    return it == recipes_.end() ? nullptr : &it->second;
  }

  const Recipe& at(int category_id) const {
    if (const Recipe* r = find(category_id)) return *r;
    throw ValidationError("no recipe for category " + std::to_string(category_id));
  }

  const Taxonomy& taxonomy() const { return taxonomy_; }
  const std::map<int, Recipe>& recipes() const { return recipes_; }
  std::size_t size() const { return recipes_.size(); }

 private:
  std::map<int, Recipe> recipes_;
  Taxonomy taxonomy_;
};

/// Categories served on one day, grouped by hyper category.
struct DailyMenu {
  std::string date;
  std::map<Hyper, std::vector<int>> candidates;

  const std::vector<int>& of(Hyper h) const {
    static const std::vector<int> kEmpty;
    auto it = candidates.find(h);
    return it == candidates.end() ? kEmpty : it->second;
  }

  void validate(const Taxonomy& taxonomy) const {
    for (const auto& [hyper, ids] : candidates) {
      for (int id : ids) {
        if (taxonomy.hyper_of(id) != hyper) {
          throw ValidationError("menu " + date + ": category " + std::to_string(id) +
                                " is not a " + std::string(hyper_name(hyper)));
        }
      }
    }
  }
};

enum class CaptureStage { kBefore, kDuring, kAfter };

inline std::string_view stage_name(CaptureStage s) {
  switch (s) {
    case CaptureStage::kBefore: return "before";
    case CaptureStage::kDuring: return "during";
    case CaptureStage::kAfter: return "after";
  }
  return "unknown";
}

/// One connected food segment and whatever has been estimated about it so far.
struct FoodItem {
  Hyper hyper = Hyper::kMainCourse;
  std::optional<int> category;
  PixelRegion region;

  std::optional<PlateType> plate;
  double volume_ml = 0.0;
  std::optional<double> weight_g;
  /// Region centroid projected on the tray plane, camera frame (mm).
  std::optional<Eigen::Vector3d> centroid_mm;
  /// Raw recognition features (colour histogram).
  std::vector<double> features;
  /// Too much missing depth to trust geometry.
  bool unusable = false;
  /// Majority ground-truth instance id, when an instance map was supplied.
  std::optional<int> gt_instance;

  Eigen::Vector2d pixel_centroid() const {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : region) c += Eigen::Vector2d(p.u, p.v);
    return region.empty() ? c : Eigen::Vector2d(c / static_cast<double>(region.size()));
  }
};

struct MealRecord {
  CaptureStage stage = CaptureStage::kBefore;
  CameraIntrinsics intrinsics;
  DepthImage depth;
  LabelMap food;
  LabelMap plate;
  std::optional<ColorImage> color;
  std::optional<Raster<std::uint16_t>> instances;
  std::vector<FoodItem> items;
};

}  // namespace trayscan
