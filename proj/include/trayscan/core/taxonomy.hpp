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
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trayscan/core/error.hpp"

namespace trayscan {

/// Coarse food classes predicted by segmentation. 0 is background.
enum class Hyper : int {
  kMainCourse = 1,
  kSideDish = 2,
  kVegetable = 3,
  kSauce = 4,
  kSoup = 5,
  kSalad = 6,
  kDessert = 7,
};

inline constexpr int kHyperCount = 7;

inline constexpr std::array<Hyper, kHyperCount> kAllHypers = {
    Hyper::kMainCourse, Hyper::kSideDish, Hyper::kVegetable, Hyper::kSauce,
    Hyper::kSoup,       Hyper::kSalad,    Hyper::kDessert};

/// Plate types from the plate segmentation map. 0 is background.
enum class PlateType : int {
  kMainPlate = 1,
  kSaladBowl = 2,
  kSoupBowl = 3,
  kDessertBowl = 4,
  kPackagedContainer = 5,
};

inline constexpr int kPlateTypeCount = 5;

inline std::string_view hyper_name(Hyper h) {
  switch (h) {
    case Hyper::kMainCourse: return "main_course";
    case Hyper::kSideDish: return "side_dish";
    case Hyper::kVegetable: return "vegetable";
    case Hyper::kSauce: return "sauce";
    case Hyper::kSoup: return "soup";
    case Hyper::kSalad: return "salad";
    case Hyper::kDessert: return "dessert";
  }
  return "unknown";
}

inline std::string_view plate_type_name(PlateType p) {
  switch (p) {
    case PlateType::kMainPlate: return "main_plate";
    case PlateType::kSaladBowl: return "salad_bowl";
    case PlateType::kSoupBowl: return "soup_bowl";
    case PlateType::kDessertBowl: return "dessert_bowl";
    case PlateType::kPackagedContainer: return "packaged_container";
  }
  return "unknown";
}

inline bool is_hyper_index(int i) { return i >= 1 && i <= kHyperCount; }
inline bool is_plate_index(int i) { return i >= 1 && i <= kPlateTypeCount; }

inline Hyper hyper_from_index(int i) {
  if (!is_hyper_index(i)) throw ValidationError("invalid hyper category index " + std::to_string(i));
  return static_cast<Hyper>(i);
}

inline PlateType plate_from_index(int i) {
  if (!is_plate_index(i)) throw ValidationError("invalid plate type index " + std::to_string(i));
  return static_cast<PlateType>(i);
}

/// Accepts "main_course", "main course", "Main Course" or the numeric index.
inline Hyper parse_hyper(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == ' ' || c == '-') {
      key.push_back('_');
    } else {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  for (Hyper h : kAllHypers) {
    if (hyper_name(h) == key) return h;
  }
  if (!key.empty() && std::all_of(key.begin(), key.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return hyper_from_index(std::stoi(key));
  }
  throw ValidationError("unknown hyper category '" + std::string(text) + "'");
}

/// Fine-grained category id -> hyper parent.
class Taxonomy {
 public:
  void add(int category_id, Hyper hyper) {
    auto [it, inserted] = parent_.emplace(category_id, hyper);
    if (!inserted && it->second != hyper) {
      throw ValidationError("category " + std::to_string(category_id) +
                            " assigned to two hyper categories");
    }
  }

  bool contains(int category_id) const { return parent_.count(category_id) != 0; }

  Hyper hyper_of(int category_id) const {
    auto it = parent_.find(category_id);
    if (it == parent_.end()) {
      throw ValidationError("unknown fine-grained category " + std::to_string(category_id));
    }
    return it->second;
  }

  /// Ascending ids under one hyper category.
  std::vector<int> categories_of(Hyper h) const {
    std::vector<int> out;
    for (const auto& [id, parent] : parent_) {
      if (parent == h) out.push_back(id);
    }
    return out;
  }

  std::vector<int> all_categories() const {
    std::vector<int> out;
    out.reserve(parent_.size());
    for (const auto& kv : parent_) out.push_back(kv.first);
    return out;
  }

  std::size_t size() const { return parent_.size(); }

 private:
  std::map<int, Hyper> parent_;
};

}  // namespace trayscan
