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
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "trayscan/core/error.hpp"
#include "trayscan/geometry/point_cloud.hpp"

namespace trayscan::geometry {

/// Points p with normal.dot(p) + offset == 0. The normal is unit length and,
/// after orientation, points toward the camera origin (offset > 0).
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;

  double signed_distance(const Point3& p) const { return normal.dot(p) + offset; }
  Point3 project(const Point3& p) const { return p - signed_distance(p) * normal; }

  Plane oriented_toward(const Point3& viewpoint) const {
    if (signed_distance(viewpoint) < 0.0) return Plane{-normal, -offset};
    return *this;
  }

  /// Orthonormal in-plane basis (e1, e2) with e1 x e2 = normal.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> basis() const {
    const Eigen::Vector3d a = std::abs(normal.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = normal.cross(a).normalized();
    const Eigen::Vector3d e2 = normal.cross(e1);
    return {e1, e2};
  }

  static std::optional<Plane> through(const Point3& a, const Point3& b, const Point3& c) {
    const Eigen::Vector3d n = (b - a).cross(c - a);
    const double len = n.norm();
    const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
    if (!(len > 1e-12 * scale)) return std::nullopt;
    Plane p{n / len, 0.0};
    p.offset = -p.normal.dot(a);
    return p;
  }
};

struct RansacOptions {
  int iterations = 1000;
  double inlier_threshold_mm = 3.0;
  double min_inlier_fraction = 0.3;
  /// Hypotheses are scored on a seeded subsample of at most this many points;
  /// the final inlier set always uses the full pool.
  std::size_t max_scoring_points = 4096;
};

struct PlaneFit {
  Plane plane;
  std::size_t inlier_count = 0;
  double inlier_fraction = 0.0;
};

namespace detail {

struct Moments {
  Eigen::Vector3d centroid;
  Eigen::Vector3d eigenvalues;   // ascending
  Eigen::Matrix3d eigenvectors;  // columns
};

template <typename IndexRange>
Moments second_moments(std::span<const Point3> points, const IndexRange& indices) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (std::size_t i : indices) {
    c += points[i];
    ++n;
  }
  c /= static_cast<double>(n);
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (std::size_t i : indices) {
    const Eigen::Vector3d d = points[i] - c;
    m.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  return {c, es.eigenvalues(), es.eigenvectors()};
}

inline bool collinear(const Moments& m) {
  return !(m.eigenvalues(1) > 1e-12 * std::max(m.eigenvalues(2), 1e-300));
}

}  // namespace detail

/// Total-least-squares plane through a point set.
template <typename IndexRange>
Plane fit_plane_tls(std::span<const Point3> points, const IndexRange& indices) {
  const auto m = detail::second_moments(points, indices);
  if (detail::collinear(m)) throw GeometryError("plane fit: points are collinear");
  Plane p{m.eigenvectors.col(0).normalized(), 0.0};
  p.offset = -p.normal.dot(m.centroid);
  return p;
}

inline Plane fit_plane_tls(std::span<const Point3> points) {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  return fit_plane_tls(points, all);
}

/// Robust plane estimate: 3-point RANSAC hypotheses, refit by total least
/// squares on the inliers. Oriented toward the camera origin.
inline PlaneFit fit_tray_plane(std::span<const Point3> points, std::uint64_t seed, const RansacOptions& opts = {}) {
  if (points.size() < 3) throw GeometryError("plane fit: need at least 3 points");
  {
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), 0);
    if (detail::collinear(detail::second_moments(points, all))) {
      throw GeometryError("plane fit: degenerate (collinear) point cloud");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> scoring(points.size());
  std::iota(scoring.begin(), scoring.end(), 0);
  if (scoring.size() > opts.max_scoring_points) {
    std::vector<std::size_t> subset;
    subset.reserve(opts.max_scoring_points);
    std::sample(scoring.begin(), scoring.end(), std::back_inserter(subset), opts.max_scoring_points, rng);
    scoring = std::move(subset);
  }

  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::optional<Plane> best;
  std::size_t best_score = 0;
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const auto hyp = Plane::through(points[a], points[b], points[c]);
    if (!hyp) continue;
    std::size_t score = 0;
    for (std::size_t i : scoring) {
      if (std::abs(hyp->signed_distance(points[i])) <= opts.inlier_threshold_mm) ++score;
    }
    if (score > best_score) {
      best_score = score;
      best = hyp;
    }
  }
  if (!best) throw GeometryError("plane fit: no non-degenerate sample found");

  auto collect = [&](const Plane& pl) {
    std::vector<std::size_t> in;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::abs(pl.signed_distance(points[i])) <= opts.inlier_threshold_mm) in.push_back(i);
    }
    return in;
  };

  Plane plane = *best;
  std::vector<std::size_t> inliers = collect(plane);
  for (int refine = 0; refine < 2 && inliers.size() >= 3; ++refine) {
    plane = fit_plane_tls(points, inliers);
    inliers = collect(plane);
  }
  PlaneFit fit;
  fit.plane = plane.oriented_toward(Point3::Zero());
  fit.inlier_count = inliers.size();
  fit.inlier_fraction = static_cast<double>(inliers.size()) / static_cast<double>(points.size());
  if (fit.inlier_fraction < opts.min_inlier_fraction) {
    throw GeometryError("plane fit: inlier fraction " + std::to_string(fit.inlier_fraction) +
                        " below floor " + std::to_string(opts.min_inlier_fraction));
  }
  return fit;
}

}  // namespace trayscan::geometry
