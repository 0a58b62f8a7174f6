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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trayscan/core/items.hpp"
#include "trayscan/core/loaders.hpp"
#include "trayscan/core/model.hpp"
#include "trayscan/geometry/mesh.hpp"
#include "trayscan/geometry/plane.hpp"
#include "trayscan/geometry/plate.hpp"
#include "trayscan/geometry/volume.hpp"
#include "trayscan/nutrition/nutrition.hpp"
#include "trayscan/protonet/embedding.hpp"
#include "trayscan/protonet/protonet.hpp"

namespace trayscan::pipeline {

struct PipelineOptions {
  geometry::RansacOptions ransac;
  std::uint64_t ransac_seed = 1;
  DepthRange range;
  double max_invalid_fraction = 0.5;
  std::size_t min_rim_pixels = geometry::kDefaultMinRimPixels;
  /// Plate components smaller than this are ignored.
  int min_plate_area = 200;
  geometry::PlateModelSet plate_models = geometry::default_plate_models();
};

struct SceneAnalysis {
  MealRecord record;
  geometry::PlaneFit tray;
  std::vector<std::string> warnings;
};

namespace detail {

template <typename T>
std::optional<int> majority(const Raster<T>& map, const PixelRegion& region) {
  std::map<int, std::size_t> votes;
  for (const auto& p : region) {
    if (const int v = static_cast<int>(map(p.u, p.v)); v != 0) ++votes[v];
  }
  std::optional<int> best;
  std::size_t best_n = 0;
  for (const auto& [v, n] : votes) {
    if (n > best_n) best = v, best_n = n;
  }
  return best;
}

}  // namespace detail

/// Fits the tray on depth pixels that are neither plate nor food.
inline geometry::PlaneFit fit_tray(const MealRecord& rec, const PipelineOptions& opts) {
  std::vector<geometry::Point3> pts;
  for (int v = 0; v < rec.depth.height(); ++v) {
    for (int u = 0; u < rec.depth.width(); ++u) {
      const std::uint16_t z = rec.depth(u, v);
      if (rec.plate(u, v) != 0 || rec.food(u, v) != 0 || !opts.range.valid(z)) continue;
      pts.push_back(geometry::unproject_pixel(u, v, z, rec.intrinsics));
    }
  }
  return geometry::fit_tray_plane(pts, opts.ransac_seed, opts.ransac);
}

/// Volume, plate, tray-plane centroid, colour features and ground-truth
/// instance for every item of the record.
inline SceneAnalysis analyze_scene(MealRecord record, const PipelineOptions& opts = {}) {
  SceneAnalysis out;
  out.tray = fit_tray(record, opts);
  const geometry::Plane& tray = out.tray.plane;
  const CameraIntrinsics& k = record.intrinsics;

  const auto plates = connected_components(record.plate, opts.min_plate_area);
  Raster<std::uint16_t> plate_index(record.plate.width(), record.plate.height(), 0);
  for (std::size_t i = 0; i < plates.size(); ++i) {
    for (const auto& p : plates[i].region) plate_index(p.u, p.v) = static_cast<std::uint16_t>(i + 1);
  }
  std::map<std::size_t, std::optional<geometry::PlateSurface>> surfaces;
  auto surface_of = [&](std::size_t comp) -> const std::optional<geometry::PlateSurface>& {
    auto it = surfaces.find(comp);
    if (it != surfaces.end()) return it->second;
    std::optional<geometry::PlateSurface> s;
    const auto& c = plates[comp];
    auto model = opts.plate_models.find(plate_from_index(c.label));
    if (model == opts.plate_models.end()) {
      out.warnings.push_back("no model for plate type " + std::to_string(c.label));
    } else {
      try {
        s = geometry::place_plate(model->second, c.region, record.depth, k, tray, opts.min_rim_pixels, opts.range);
      } catch (const GeometryError& e) {
        out.warnings.push_back(std::string("plate ") + std::to_string(comp) + ": " + e.what());
      }
    }
    return surfaces.emplace(comp, std::move(s)).first->second;
  };

  for (std::size_t idx = 0; idx < record.items.size(); ++idx) {
    FoodItem& item = record.items[idx];
    const std::string ctx = "item " + std::to_string(idx) + " (" + std::string(hyper_name(item.hyper)) + ")";
    if (record.instances) item.gt_instance = detail::majority(*record.instances, item.region);
    if (record.color) item.features = [&] {
      const Eigen::VectorXd h = protonet::color_histogram(*record.color, item.region);
      return std::vector<double>(h.data(), h.data() + h.size());
    }();

    const std::optional<int> comp = detail::majority(plate_index, item.region);
    std::optional<geometry::PlateSurface> surface;
    if (comp) {
      item.plate = plate_from_index(plates[*comp - 1].label);
      if (*item.plate != PlateType::kPackagedContainer) surface = surface_of(*comp - 1);
    }

    const RegionMask mask(k.width, k.height, item.region);
    const FilledDepth filled = fill_region_depth(record.depth, item.region, opts.range, opts.max_invalid_fraction);
    if (filled.unusable) {
      item.unusable = true;
      out.warnings.push_back(ctx + ": too much missing depth");
      continue;
    }
    const geometry::PointCloud cloud = geometry::unproject_filled(filled, k, item.region);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : cloud.points) centroid += p;
    item.centroid_mm = tray.project(centroid / static_cast<double>(cloud.size()));

    if (item.plate == PlateType::kPackagedContainer) continue;
    if (!surface) {
      if (comp) out.warnings.push_back(ctx + ": plate not located, measuring against the tray");
      surface = geometry::PlateSurface::bare_tray(tray);
    }
    try {
      const auto samples = geometry::region_surface_cloud(filled, item.region, mask, k);
      const auto mesh = geometry::trim_to_region(geometry::triangulate_surface(samples, tray), mask, k);
      item.volume_ml = geometry::food_volume(mesh, *surface, tray);
    } catch (const GeometryError& e) {
      item.unusable = true;
      out.warnings.push_back(ctx + ": " + e.what());
    }
  }
  out.record = std::move(record);
  return out;
}

/// Few-shot classifier: embedding plus prototypes from the annotated support set.
struct Recognizer {
  protonet::AffineEmbedding embedding;
  protonet::PrototypeSet prototypes;
  Taxonomy taxonomy;

  static Recognizer build(protonet::AffineEmbedding f, const protonet::Dataset& support, const Taxonomy& taxonomy) {
    Recognizer r{std::move(f), {}, taxonomy};
    r.prototypes = protonet::compute_prototypes(support, r.embedding);
    return r;
  }

  int classify(const FoodItem& item, const DailyMenu* menu) const {
    if (item.features.empty()) throw ValidationError("recognize: item has no colour features");
    const Eigen::Map<const Eigen::VectorXd> x(item.features.data(), static_cast<Eigen::Index>(item.features.size()));
    return protonet::predict(embedding.embed(Eigen::VectorXd(x)), prototypes, taxonomy, item.hyper, menu);
  }
};

inline void recognize_items(std::vector<FoodItem>& items, const Recognizer& rec, const DailyMenu* menu) {
  for (auto& item : items) item.category = rec.classify(item, menu);
}

/// Assigns each item the true category of its majority instance; items
/// without one keep whatever category they had.
inline void oracle_recognize(std::vector<FoodItem>& items, const std::map<int, int>& instance_category) {
  for (auto& item : items) {
    if (!item.gt_instance) continue;
    if (auto it = instance_category.find(*item.gt_instance); it != instance_category.end()) item.category = it->second;
  }
}

inline nutrition::IntakeReport estimate_intake(const SceneAnalysis& before, const SceneAnalysis& after,
                                               const RecipeBook& recipes, const nutrition::DensityModel& densities,
                                               const nutrition::IntakeOptions& opts = {},
                                               const std::string& meal_id = {}) {
  const auto match = nutrition::match_items(before.record.items, after.record.items);
  return nutrition::compute_intake(before.record.items, after.record.items, match, recipes, densities, opts, meal_id);
}

}  // namespace trayscan::pipeline
