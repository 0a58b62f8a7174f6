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
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/error.hpp"
#include "trayscan/geometry/predicates.hpp"

namespace trayscan::geometry {

using Triangle = std::array<std::size_t, 3>;

/// 2D Delaunay triangulation by radial sweep-hull insertion with Lawson edge
/// flips. Duplicate points are ignored. Output triangles are counter-clockwise.
class Delaunay2D {
 public:
  explicit Delaunay2D(std::span<const Eigen::Vector2d> points) : pts_(points) { build(); }

  const std::vector<Triangle>& triangles() const { return out_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  double x(std::size_t i) const { return pts_[i].x(); }
  double y(std::size_t i) const { return pts_[i].y(); }

  // Clockwise test in the internal winding; exact.
  bool visible(double px, double py, std::size_t q, std::size_t r) const {
    return predicates::orient2d(px, py, x(q), y(q), x(r), y(r)) > 0.0;
  }

  static double sq_dist(double ax, double ay, double bx, double by) {
    const double dx = ax - bx, dy = ay - by;
    return dx * dx + dy * dy;
  }

  static double circumradius_sq(double ax, double ay, double bx, double by, double cx, double cy) {
    const double dx = bx - ax, dy = by - ay, ex = cx - ax, ey = cy - ay;
    const double bl = dx * dx + dy * dy, cl = ex * ex + ey * ey;
    const double d = 0.5 / (dx * ey - dy * ex);
    const double px = (ey * bl - dy * cl) * d, py = (dx * cl - ex * bl) * d;
    const double r = px * px + py * py;
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  }

  static double pseudo_angle(double dx, double dy) {
    const double p = dx / (std::abs(dx) + std::abs(dy));
    return (dy > 0.0 ? 3.0 - p : 1.0 + p) / 4.0;
  }

  std::size_t hash_key(double px, double py) const {
    const double a = pseudo_angle(px - center_x_, py - center_y_);
    auto k = static_cast<std::size_t>(std::floor(a * static_cast<double>(hash_size_)));
    return k % hash_size_;
  }

  void link(std::size_t a, std::size_t b) {
    halfedges_[a] = b;
    if (b != kNone) halfedges_[b] = a;
  }

  std::size_t add_triangle(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t a, std::size_t b,
                           std::size_t c) {
    const std::size_t t = triangles_.size();
    triangles_.push_back(i0);
    triangles_.push_back(i1);
    triangles_.push_back(i2);
    halfedges_.resize(triangles_.size(), kNone);
    link(t, a);
    link(t + 1, b);
    link(t + 2, c);
    return t;
  }

  std::size_t legalize(std::size_t a) {
    std::size_t ar = 0;
    stack_.clear();
    while (true) {
      const std::size_t b = halfedges_[a];
      const std::size_t a0 = a - a % 3;
      ar = a0 + (a + 2) % 3;
      if (b == kNone) {
        if (stack_.empty()) break;
        a = stack_.back();
        stack_.pop_back();
        continue;
      }
      const std::size_t b0 = b - b % 3;
      const std::size_t al = a0 + (a + 1) % 3;
      const std::size_t bl = b0 + (b + 2) % 3;
      const std::size_t p0 = triangles_[ar];
      const std::size_t pr = triangles_[a];
      const std::size_t pl = triangles_[al];
      const std::size_t p1 = triangles_[bl];
      const bool illegal =
          predicates::incircle(x(p0), y(p0), x(pr), y(pr), x(pl), y(pl), x(p1), y(p1)) < 0.0;
      if (!illegal) {
        if (stack_.empty()) break;
        a = stack_.back();
        stack_.pop_back();
        continue;
      }
      triangles_[a] = p1;
      triangles_[b] = p0;
      const std::size_t hbl = halfedges_[bl];
      if (hbl == kNone) {
        std::size_t e = hull_start_;
        do {
          if (hull_tri_[e] == bl) {
            hull_tri_[e] = a;
            break;
          }
          e = hull_prev_[e];
        } while (e != hull_start_);
      }
      link(a, hbl);
      link(b, halfedges_[ar]);
      link(ar, bl);
      stack_.push_back(b0 + (b + 1) % 3);
    }
    return ar;
  }

  void build() {
    const std::size_t n = pts_.size();
    if (n < 3) throw GeometryError("delaunay: need at least 3 points");
    for (const auto& p : pts_) {
      if (!p.allFinite()) throw GeometryError("delaunay: non-finite coordinate");
    }

    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const auto& p : pts_) {
      min_x = std::min(min_x, p.x());
      min_y = std::min(min_y, p.y());
      max_x = std::max(max_x, p.x());
      max_y = std::max(max_y, p.y());
    }
    const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);

    std::size_t i0 = kNone, i1 = kNone, i2 = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sq_dist(cx, cy, x(i), y(i));
      if (d < best) {
        i0 = i;
        best = d;
      }
    }
    best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == i0) continue;
      const double d = sq_dist(x(i0), y(i0), x(i), y(i));
      if (d < best && d > 0.0) {
        i1 = i;
        best = d;
      }
    }
    if (i1 == kNone) throw GeometryError("delaunay: all points coincide");
    double min_radius = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == i0 || i == i1) continue;
      if (predicates::orient2d(x(i0), y(i0), x(i1), y(i1), x(i), y(i)) == 0.0) continue;
      const double r = circumradius_sq(x(i0), y(i0), x(i1), y(i1), x(i), y(i));
      if (r < min_radius) {
        i2 = i;
        min_radius = r;
      }
    }
    if (i2 == kNone) throw GeometryError("delaunay: all points are collinear");
    if (visible(x(i0), y(i0), i1, i2)) std::swap(i1, i2);

    {
      const double ax = x(i0), ay = y(i0);
      const double dx = x(i1) - ax, dy = y(i1) - ay, ex = x(i2) - ax, ey = y(i2) - ay;
      const double bl = dx * dx + dy * dy, cl = ex * ex + ey * ey;
      const double d = 0.5 / (dx * ey - dy * ex);
      center_x_ = ax + (ey * bl - dy * cl) * d;
      center_y_ = ay + (dx * cl - ex * bl) * d;
    }

    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<double> dists(n);
    for (std::size_t i = 0; i < n; ++i) dists[i] = sq_dist(x(i), y(i), center_x_, center_y_);
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return dists[a] < dists[b]; });

    hash_size_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    hash_.assign(hash_size_, kNone);
    hull_prev_.assign(n, 0);
    hull_next_.assign(n, 0);
    hull_tri_.assign(n, 0);
    hull_start_ = i0;

    hull_next_[i0] = hull_prev_[i2] = i1;
    hull_next_[i1] = hull_prev_[i0] = i2;
    hull_next_[i2] = hull_prev_[i1] = i0;
    hull_tri_[i0] = 0;
    hull_tri_[i1] = 1;
    hull_tri_[i2] = 2;
    hash_[hash_key(x(i0), y(i0))] = i0;
    hash_[hash_key(x(i1), y(i1))] = i1;
    hash_[hash_key(x(i2), y(i2))] = i2;

    triangles_.reserve(3 * (2 * n));
    halfedges_.reserve(3 * (2 * n));
    add_triangle(i0, i1, i2, kNone, kNone, kNone);

    double xp = std::numeric_limits<double>::quiet_NaN(), yp = xp;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = ids[k];
      const double px = x(i), py = y(i);
      if (k > 0 && px == xp && py == yp) continue;
      xp = px;
      yp = py;
      if (i == i0 || i == i1 || i == i2) continue;
      if ((px == x(i0) && py == y(i0)) || (px == x(i1) && py == y(i1)) || (px == x(i2) && py == y(i2))) continue;

      std::size_t start = 0;
      const std::size_t key = hash_key(px, py);
      for (std::size_t j = 0; j < hash_size_; ++j) {
        start = hash_[(key + j) % hash_size_];
        if (start != kNone && start != hull_next_[start]) break;
      }
      start = hull_prev_[start];
      std::size_t e = start;
      std::size_t q = 0;
      while (q = hull_next_[e], !visible(px, py, e, q)) {
        e = q;
        if (e == start) {
          e = kNone;
          break;
        }
      }
      if (e == kNone) continue;  // lies on the hull; nothing to add

      std::size_t t = add_triangle(e, i, hull_next_[e], kNone, kNone, hull_tri_[e]);
      hull_tri_[i] = legalize(t + 2);
      hull_tri_[e] = t;

      std::size_t nxt = hull_next_[e];
      while (q = hull_next_[nxt], visible(px, py, nxt, q)) {
        t = add_triangle(nxt, i, q, hull_tri_[i], kNone, hull_tri_[nxt]);
        hull_tri_[i] = legalize(t + 2);
        hull_next_[nxt] = nxt;  // removed from hull
        nxt = q;
      }
      if (e == start) {
        while (q = hull_prev_[e], visible(px, py, q, e)) {
          t = add_triangle(q, i, e, kNone, hull_tri_[e], hull_tri_[q]);
          legalize(t + 2);
          hull_tri_[q] = t;
          hull_next_[e] = e;
          e = q;
        }
      }
      hull_start_ = hull_prev_[i] = e;
      hull_next_[e] = hull_prev_[nxt] = i;
      hull_next_[i] = nxt;
      hash_[hash_key(px, py)] = i;
      hash_[hash_key(x(e), y(e))] = e;
    }

    out_.reserve(triangles_.size() / 3);
    for (std::size_t t = 0; t < triangles_.size(); t += 3) {
      // internal winding is clockwise; flip to counter-clockwise
      out_.push_back({triangles_[t], triangles_[t + 2], triangles_[t + 1]});
    }
  }

  std::span<const Eigen::Vector2d> pts_;
  std::vector<std::size_t> triangles_;
  std::vector<std::size_t> halfedges_;
  std::vector<std::size_t> hull_prev_, hull_next_, hull_tri_;
  std::size_t hull_start_ = 0;
  std::vector<std::size_t> hash_;
  std::size_t hash_size_ = 0;
  double center_x_ = 0.0, center_y_ = 0.0;
  std::vector<std::size_t> stack_;
  std::vector<Triangle> out_;
};

inline std::vector<Triangle> delaunay_triangulate(std::span<const Eigen::Vector2d> points) {
  return Delaunay2D(points).triangles();
}

}  // namespace trayscan::geometry
