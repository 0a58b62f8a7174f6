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
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/items.hpp"
#include "trayscan/geometry/delaunay.hpp"
#include "trayscan/geometry/plane.hpp"
#include "trayscan/geometry/point_cloud.hpp"

namespace trayscan::geometry {

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
};

/// Projects every point into the plane's (e1, e2) basis.
inline std::vector<Eigen::Vector2d> plane_coordinates(std::span<const Point3> points, const Plane& plane) {
  const auto [e1, e2] = plane.basis();
  std::vector<Eigen::Vector2d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(e1.dot(p), e2.dot(p));
  return out;
}

/// Delaunay triangulation of the plane-projected cloud, lifted back to the
/// original 3D points. Zero-area triangles are not emitted.
inline TriangleMesh triangulate_surface(const PointCloud& cloud, const Plane& plane) {
  if (cloud.size() < 3) throw GeometryError("triangulate_surface: need at least 3 points");
  const auto flat = plane_coordinates(cloud.points, plane);
  TriangleMesh mesh;
  mesh.vertices = cloud.points;
  double extent = 0.0;
  for (const auto& p : flat) extent = std::max(extent, p.cwiseAbs().maxCoeff());
  const double min_area2 = 1e-14 * std::max(extent * extent, 1.0);
  for (const Triangle& t : delaunay_triangulate(flat)) {
    const Eigen::Vector2d a = flat[t[1]] - flat[t[0]];
    const Eigen::Vector2d b = flat[t[2]] - flat[t[0]];
    if (std::abs(a.x() * b.y() - a.y() * b.x()) > min_area2) mesh.triangles.push_back(t);
  }
  if (mesh.triangles.empty()) throw GeometryError("triangulate_surface: projected points are collinear");
  return mesh;
}

/// Keeps only triangles whose centroid reprojects into a pixel of the region.
/// Removes the convex-hull bridges Delaunay adds across concave outlines.
inline TriangleMesh trim_to_region(TriangleMesh mesh, const RegionMask& mask, const CameraIntrinsics& k) {
  std::vector<Triangle> kept;
  kept.reserve(mesh.triangles.size());
  for (const Triangle& t : mesh.triangles) {
    const Point3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    const Eigen::Vector2d px = project_point(c, k);
    if (mask.contains(static_cast<int>(std::lround(px.x())), static_cast<int>(std::lround(px.y())))) {
      kept.push_back(t);
    }
  }
  mesh.triangles = std::move(kept);
  return mesh;
}

/// Surface samples of a food region: one point per pixel centre plus the
/// outer pixel corners of the boundary, so the mesh covers each boundary
/// pixel's full footprint rather than stopping at its centre. Corner depth is
/// the mean of the adjacent region pixels.
inline PointCloud region_surface_cloud(const FilledDepth& filled, const PixelRegion& region, const RegionMask& mask,
                                       const CameraIntrinsics& k) {
  PointCloud cloud = unproject_filled(filled, k, region);
  // corner (u + 0.5 du, v + 0.5 dv) keyed on doubled integer coordinates
  std::map<std::pair<int, int>, std::pair<double, int>> corners;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const auto& p = region[i];
    if (filled.depth[i] == 0) continue;
    for (int dv = -1; dv <= 1; dv += 2) {
      for (int du = -1; du <= 1; du += 2) {
        const bool outer = !mask.contains(p.u + du, p.v) || !mask.contains(p.u, p.v + dv) ||
                           !mask.contains(p.u + du, p.v + dv);
        if (!outer) continue;
        auto& acc = corners[{2 * p.u + du, 2 * p.v + dv}];
        acc.first += filled.depth[i];
        acc.second += 1;
      }
    }
  }
  for (const auto& [key, acc] : corners) {
    const double u = 0.5 * key.first, v = 0.5 * key.second;
    const double z = acc.first / acc.second;
    cloud.push_back(unproject_pixel(u, v, z, k), Eigen::Vector2d(u, v));
  }
  return cloud;
}

}  // namespace trayscan::geometry
