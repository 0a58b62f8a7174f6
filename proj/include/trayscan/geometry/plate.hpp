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
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/items.hpp"
#include "trayscan/core/taxonomy.hpp"
#include "trayscan/core/text_io.hpp"
#include "trayscan/geometry/plane.hpp"
#include "trayscan/geometry/point_cloud.hpp"

namespace trayscan::geometry {

/// Rotationally symmetric plate: the interior surface lies `depth_at(r)`
/// millimetres below the rim plane at radial distance r from the centre, and
/// the rim plane sits `rim_height_mm` above the tray.
struct PlateModel {
  PlateType type = PlateType::kMainPlate;
  double rim_radius_mm = 100.0;
  double rim_height_mm = 10.0;
  /// (r, depth) knots, strictly increasing r; linear in between, clamped outside.
  std::vector<std::pair<double, double>> profile{{0.0, 0.0}};

  double depth_at(double r) const {
    if (profile.empty()) return 0.0;
    if (r <= profile.front().first) return profile.front().second;
    if (r >= profile.back().first) return profile.back().second;
    auto hi = std::upper_bound(profile.begin(), profile.end(), r,
                               [](double value, const auto& knot) { return value < knot.first; });
    auto lo = hi - 1;
    const double t = (r - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  /// Interior surface height above the tray at radius r.
  double surface_height(double r) const { return rim_height_mm - depth_at(std::min(r, rim_radius_mm)); }

  void validate() const {
    if (!(rim_radius_mm > 0.0)) throw ValidationError("plate model: rim radius must be positive");
    if (!(rim_height_mm >= 0.0)) throw ValidationError("plate model: rim height must be non-negative");
    if (profile.empty()) throw ValidationError("plate model: empty profile");
    for (std::size_t i = 0; i < profile.size(); ++i) {
      if (!(profile[i].second >= 0.0)) throw ValidationError("plate model: negative profile depth");
      if (i > 0) {
        if (!(profile[i].first > profile[i - 1].first)) {
          throw ValidationError("plate model: profile radii must increase");
        }
        if (profile[i].second > profile[i - 1].second) {
          throw ValidationError("plate model: profile must not rise toward the centre");
        }
      }
    }
    if (profile.back().second > rim_height_mm) throw ValidationError("plate model: profile deeper than rim height");
  }

  static PlateModel flat(PlateType type, double rim_radius, double rim_height) {
    return PlateModel{type, rim_radius, rim_height, {{0.0, 0.0}, {rim_radius, 0.0}}};
  }

  /// Spherical-cap bowl of the given depth at the centre.
  static PlateModel bowl(PlateType type, double rim_radius, double rim_height, double depth, int knots = 48) {
    PlateModel m{type, rim_radius, rim_height, {}};
    const double sphere = (rim_radius * rim_radius + depth * depth) / (2.0 * depth);
    for (int i = 0; i <= knots; ++i) {
      const double r = rim_radius * i / knots;
      const double d = std::sqrt(std::max(sphere * sphere - r * r, 0.0)) - (sphere - depth);
      m.profile.emplace_back(r, std::max(d, 0.0));
    }
    m.profile.back().second = 0.0;
    return m;
  }
};

using PlateModelSet = std::map<PlateType, PlateModel>;

inline PlateModelSet default_plate_models() {
  PlateModelSet s;
  s[PlateType::kMainPlate] = PlateModel::flat(PlateType::kMainPlate, 90.0, 12.0);
  s[PlateType::kSaladBowl] = PlateModel::bowl(PlateType::kSaladBowl, 50.0, 38.0, 22.0);
  s[PlateType::kSoupBowl] = PlateModel::bowl(PlateType::kSoupBowl, 45.0, 42.0, 26.0);
  s[PlateType::kDessertBowl] = PlateModel::bowl(PlateType::kDessertBowl, 40.0, 30.0, 18.0);
  s[PlateType::kPackagedContainer] = PlateModel::flat(PlateType::kPackagedContainer, 30.0, 30.0);
  return s;
}

inline io::Json plate_models_to_json(const PlateModelSet& set) {
  io::Json arr = io::Json::array();
  for (const auto& [type, m] : set) {
    io::Json profile = io::Json::array();
    for (const auto& [r, h] : m.profile) profile.push_back({r, h});
    arr.push_back({{"plate_type", static_cast<int>(type)},
                   {"rim_radius_mm", m.rim_radius_mm},
                   {"rim_height_mm", m.rim_height_mm},
                   {"profile", profile}});
  }
  return arr;
}

/// JSON list of {plate_type, rim_radius_mm, profile: [[r, h], ...]} with an
/// optional rim_height_mm. Types missing from the file keep their defaults.
inline PlateModelSet plate_models_from_json(const io::Json& j, const std::string& name = "plate models") {
  if (!j.is_array()) throw ValidationError(name + ": expected a JSON list");
  PlateModelSet set = default_plate_models();
  try {
    for (const auto& entry : j) {
      PlateModel m;
      m.type = plate_from_index(entry.at("plate_type").get<int>());
      m.rim_radius_mm = entry.at("rim_radius_mm").get<double>();
      m.rim_height_mm = entry.value("rim_height_mm", set[m.type].rim_height_mm);
      m.profile.clear();
      for (const auto& knot : entry.at("profile")) {
        m.profile.emplace_back(knot.at(0).get<double>(), knot.at(1).get<double>());
      }
      m.validate();
      set[m.type] = std::move(m);
    }
  } catch (const io::Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return set;
}

inline PlateModelSet load_plate_models(const std::filesystem::path& path) {
  return plate_models_from_json(io::read_json(path), path.string());
}

/// A plate model placed on the tray. Without a model it is the bare tray.
class PlateSurface {
 public:
  PlateSurface() = default;
  PlateSurface(const Plane& tray, const Point3& center, std::optional<PlateModel> model)
      : tray_(tray), center_(tray.project(center)), model_(std::move(model)) {}

  static PlateSurface bare_tray(const Plane& tray) { return PlateSurface(tray, tray.project(Point3::Zero()), std::nullopt); }

  const Plane& tray() const { return tray_; }
  const Point3& center() const { return center_; }
  const std::optional<PlateModel>& model() const { return model_; }

  double radial_distance(const Point3& p) const { return (tray_.project(p) - center_).norm(); }

  bool contains(const Point3& p) const {
    return !model_ || radial_distance(p) <= model_->rim_radius_mm;
  }

  /// Height of the plate's interior surface above the tray beneath p.
  double height_above_tray(const Point3& p) const {
    if (!model_) return 0.0;
    return model_->surface_height(radial_distance(p));
  }

  /// Height of p above the plate surface, along the tray normal.
  double height_above_surface(const Point3& p) const { return tray_.signed_distance(p) - height_above_tray(p); }

 private:
  Plane tray_;
  Point3 center_ = Point3::Zero();
  std::optional<PlateModel> model_;
};

inline constexpr std::size_t kDefaultMinRimPixels = 20;

/// Locates a plate from its segmentation region: the centre is the mean of the
/// region's outline points projected onto the tray; orientation follows the
/// tray normal. Outline pixels touching the raster border are ignored.
inline PlateSurface place_plate(const PlateModel& model, const PixelRegion& plate_region, const DepthImage& depth,
                                const CameraIntrinsics& k, const Plane& tray,
                                std::size_t min_rim_pixels = kDefaultMinRimPixels, DepthRange range = {}) {
  if (plate_region.empty()) throw GeometryError("place_plate: empty plate region");
  const RegionMask mask(depth.width(), depth.height(), plate_region);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (const auto& p : region_boundary(plate_region, mask)) {
    if (p.u == 0 || p.v == 0 || p.u == depth.width() - 1 || p.v == depth.height() - 1) continue;
    const std::uint16_t z = depth(p.u, p.v);
    if (!range.valid(z)) continue;
    sum += tray.project(unproject_pixel(p.u, p.v, z, k));
    ++count;
  }
  if (count < min_rim_pixels) {
    throw GeometryError("place_plate: only " + std::to_string(count) + " rim pixels, need " +
                        std::to_string(min_rim_pixels));
  }
  return PlateSurface(tray, sum / static_cast<double>(count), model);
}

}  // namespace trayscan::geometry
