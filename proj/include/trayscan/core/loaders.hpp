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

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "trayscan/core/items.hpp"
#include "trayscan/core/model.hpp"
#include "trayscan/core/raster_io.hpp"
#include "trayscan/core/text_io.hpp"

namespace trayscan {

inline CameraIntrinsics intrinsics_from_json(const io::Json& j, const std::string& name = "intrinsics") {
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const io::Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  }
  try {
    k.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return k;
}

inline io::Json intrinsics_to_json(const CameraIntrinsics& k) {
  return io::Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                  {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  return intrinsics_from_json(io::read_json(path), path.string());
}

inline constexpr const char* kRecipeHeader =
    "category_id,hyper,kcal_100g,cho_100g,fat_100g,protein_100g,salt_100g,fiber_100g,density_g_per_ml";

inline RecipeBook parse_recipes(std::string_view text, const std::string& name) {
  const auto table = io::parse_csv(text, name);
  static const char* kRequired[] = {"category_id", "hyper", "kcal_100g", "cho_100g", "fat_100g",
                                    "protein_100g", "salt_100g", "fiber_100g", "density_g_per_ml"};
  for (const char* col : kRequired) {
    if (table.column(col) < 0) throw ValidationError(name + ": missing column " + col);
  }
  const int portion_col = table.column("portion_g");
  RecipeBook book;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = name + ":" + std::to_string(table.line_numbers[r]);
    auto cell = [&](const char* col) -> const std::string& { return row[table.column(col)]; };
    Recipe rec;
    rec.category_id = static_cast<int>(io::parse_int(cell("category_id"), ctx));
    rec.hyper = parse_hyper(cell("hyper"));
    rec.per_100g.kcal = io::parse_double(cell("kcal_100g"), ctx);
    rec.per_100g.cho_g = io::parse_double(cell("cho_100g"), ctx);
    rec.per_100g.fat_g = io::parse_double(cell("fat_100g"), ctx);
    rec.per_100g.protein_g = io::parse_double(cell("protein_100g"), ctx);
    rec.per_100g.salt_g = io::parse_double(cell("salt_100g"), ctx);
    rec.per_100g.fiber_g = io::parse_double(cell("fiber_100g"), ctx);
    rec.density_g_per_ml = io::parse_double(cell("density_g_per_ml"), ctx);
    if (portion_col >= 0 && !row[portion_col].empty()) {
      rec.portion_g = io::parse_double(row[portion_col], ctx);
    }
    if (book.find(rec.category_id)) {
      throw ValidationError(ctx + ": duplicate category_id " + std::to_string(rec.category_id));
    }
    try {
      book.add(rec);
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
  }
  return book;
}

inline RecipeBook load_recipes(const std::filesystem::path& path) {
  return parse_recipes(io::read_text(path), path.string());
}

inline std::string format_recipes(const RecipeBook& book) {
  std::ostringstream out;
  out << kRecipeHeader << ",portion_g\n";
  for (const auto& [id, r] : book.recipes()) {
    out << id << ',' << hyper_name(r.hyper);
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) out << ',' << io::format_double(r.per_100g[i]);
    out << ',' << io::format_double(r.density_g_per_ml) << ',';
    if (r.portion_g) out << io::format_double(*r.portion_g);
    out << '\n';
  }
  return out.str();
}

inline void save_recipes(const std::filesystem::path& path, const RecipeBook& book) {
  io::write_text_atomic(path, format_recipes(book));
}

/// Menu JSON: {"main_course": [ids...], ...}; an optional "date" string key.
inline DailyMenu menu_from_json(const io::Json& j, const Taxonomy& taxonomy, const std::string& name) {
  if (!j.is_object()) throw ValidationError(name + ": menu must be a JSON object");
  DailyMenu menu;
  for (const auto& [key, value] : j.items()) {
    if (key == "date") {
      menu.date = value.get<std::string>();
      continue;
    }
    const Hyper h = parse_hyper(key);
    if (!value.is_array()) throw ValidationError(name + ": '" + key + "' must list category ids");
    auto& ids = menu.candidates[h];
    for (const auto& id : value) ids.push_back(id.get<int>());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  if (menu.date.empty()) menu.date = std::filesystem::path(name).stem().string();
  try {
    menu.validate(taxonomy);
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return menu;
}

inline io::Json menu_to_json(const DailyMenu& menu) {
  io::Json j = io::Json::object();
  if (!menu.date.empty()) j["date"] = menu.date;
  for (const auto& [h, ids] : menu.candidates) j[std::string(hyper_name(h))] = ids;
  return j;
}

inline DailyMenu load_menu(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  return menu_from_json(io::read_json(path), taxonomy, path.string());
}

struct SceneLoadOptions {
  int min_item_area = kDefaultMinItemArea;
  CaptureStage stage = CaptureStage::kBefore;
};

/// Builds a validated MealRecord from in-memory rasters.
inline MealRecord make_record(DepthImage depth, LabelMap food, LabelMap plate, const CameraIntrinsics& intr,
                              const SceneLoadOptions& opts = {}, const std::string& context = "scene") {
  intr.validate();
  auto check_dims = [&](int w, int h, const char* what) {
    if (w != intr.width || h != intr.height) {
      throw ValidationError(context + ": " + what + " is " + std::to_string(w) + "x" + std::to_string(h) +
                            ", intrinsics expect " + std::to_string(intr.width) + "x" +
                            std::to_string(intr.height));
    }
  };
  check_dims(depth.width(), depth.height(), "depth image");
  check_dims(food.width(), food.height(), "food label map");
  check_dims(plate.width(), plate.height(), "plate label map");
  validate_labels(food, true, context + " food labels");
  validate_labels(plate, false, context + " plate labels");
  MealRecord rec;
  rec.stage = opts.stage;
  rec.intrinsics = intr;
  rec.items = extract_items(food, opts.min_item_area);
  rec.depth = std::move(depth);
  rec.food = std::move(food);
  rec.plate = std::move(plate);
  return rec;
}

inline MealRecord load_scene(const std::filesystem::path& depth_path, const std::filesystem::path& food_path,
                             const std::filesystem::path& plate_path, const std::filesystem::path& intrinsics_path,
                             const SceneLoadOptions& opts = {}) {
  const CameraIntrinsics intr = load_intrinsics(intrinsics_path);
  DepthImage depth = io::read_depth(depth_path);
  LabelMap food = io::read_labels(food_path);
  LabelMap plate = io::read_labels(plate_path);
  auto named_check = [&](int w, int h, const std::filesystem::path& p) {
    if (w != intr.width || h != intr.height) {
      throw ValidationError(p.string() + ": dimensions " + std::to_string(w) + "x" + std::to_string(h) +
                            " do not match intrinsics " + std::to_string(intr.width) + "x" +
                            std::to_string(intr.height));
    }
  };
  named_check(depth.width(), depth.height(), depth_path);
  named_check(food.width(), food.height(), food_path);
  named_check(plate.width(), plate.height(), plate_path);
  validate_labels(food, true, food_path.string());
  validate_labels(plate, false, plate_path.string());
  return make_record(std::move(depth), std::move(food), std::move(plate), intr, opts, depth_path.string());
}

}  // namespace trayscan
