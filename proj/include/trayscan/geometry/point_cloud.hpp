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

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/error.hpp"
#include "trayscan/core/items.hpp"
#include "trayscan/core/types.hpp"

namespace trayscan::geometry {

/// Camera frame, millimetres: x right, y down, z along the optical axis.
using Point3 = Eigen::Vector3d;

struct PointCloud {
  std::vector<Point3> points;
  /// Source pixel (sub-pixel for synthesized boundary points).
  std::vector<Eigen::Vector2d> pixels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(const Point3& p, const Eigen::Vector2d& px) {
    points.push_back(p);
    pixels.push_back(px);
  }
};

inline Point3 unproject_pixel(double u, double v, double z, const CameraIntrinsics& k) {
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

inline Eigen::Vector2d project_point(const Point3& p, const CameraIntrinsics& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

/// One point per valid-depth pixel of the region.
inline PointCloud unproject(const DepthImage& depth, const CameraIntrinsics& k, const PixelRegion& region,
                            DepthRange range = {}) {
  if (region.empty()) throw GeometryError("unproject: empty region");
  PointCloud cloud;
  cloud.points.reserve(region.size());
  cloud.pixels.reserve(region.size());
  for (const auto& p : region) {
    if (!depth.contains(p.u, p.v)) throw GeometryError("unproject: pixel outside raster");
    const std::uint16_t z = depth(p.u, p.v);
    if (!range.valid(z)) continue;
    cloud.push_back(unproject_pixel(p.u, p.v, z, k), Eigen::Vector2d(p.u, p.v));
  }
  if (cloud.empty()) throw GeometryError("unproject: region has no valid depth");
  return cloud;
}

/// Unprojects a region whose missing depth has already been filled.
inline PointCloud unproject_filled(const FilledDepth& filled, const CameraIntrinsics& k, const PixelRegion& region) {
  if (region.empty()) throw GeometryError("unproject: empty region");
  PointCloud cloud;
  cloud.points.reserve(region.size());
  cloud.pixels.reserve(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) {
    const double z = filled.depth[i];
    if (z <= 0.0) continue;
    cloud.push_back(unproject_pixel(region[i].u, region[i].v, z, k),
                    Eigen::Vector2d(region[i].u, region[i].v));
  }
  if (cloud.empty()) throw GeometryError("unproject: region has no valid depth");
  return cloud;
}

}  // namespace trayscan::geometry
