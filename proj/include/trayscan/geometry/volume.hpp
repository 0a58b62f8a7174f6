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

#include "trayscan/geometry/mesh.hpp"
#include "trayscan/geometry/plate.hpp"

namespace trayscan::geometry {

inline constexpr double kCubicMmPerMl = 1000.0;

/// Integrates the height of the food surface above the plate surface along
/// the tray normal: sum over triangles of projected area times the mean
/// vertex height, with negative vertex heights clamped to zero. Millilitres.
inline double food_volume(const TriangleMesh& mesh, const PlateSurface& plate, const Plane& tray) {
  if (mesh.empty()) throw GeometryError("food_volume: empty mesh");
  std::vector<double> heights(mesh.vertices.size());
  bool any_inside = false;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Point3& p = mesh.vertices[i];
    any_inside = any_inside || plate.contains(p);
    heights[i] = std::max(tray.signed_distance(p) - plate.height_above_tray(p), 0.0);
  }
  if (!any_inside) throw GeometryError("food_volume: mesh lies entirely outside the plate");
  double volume = 0.0;
  for (const Triangle& t : mesh.triangles) {
    const Point3& a = mesh.vertices[t[0]];
    const Point3& b = mesh.vertices[t[1]];
    const Point3& c = mesh.vertices[t[2]];
    const double area = 0.5 * std::abs((b - a).cross(c - a).dot(tray.normal));
    volume += area * (heights[t[0]] + heights[t[1]] + heights[t[2]]) / 3.0;
  }
  return volume / kCubicMmPerMl;
}

struct ConsumedVolume {
  double consumed_ml = 0.0;
  /// before - after, unclamped.
  double raw_ml = 0.0;
};

inline ConsumedVolume consumed_volume(double before_ml, double after_ml) {
  const double raw = before_ml - after_ml;
  return {std::max(raw, 0.0), raw};
}

}  // namespace trayscan::geometry
