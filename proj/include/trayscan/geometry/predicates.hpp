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

#include <array>
#include <cmath>

namespace trayscan::geometry::predicates {

namespace detail {

struct TwoTerm {
  double hi;
  double lo;
};

inline TwoTerm two_sum(double a, double b) {
  const double s = a + b;
  const double bv = s - a;
  const double av = s - bv;
  return {s, (a - av) + (b - bv)};
}

inline TwoTerm two_diff(double a, double b) {
  const double s = a - b;
  const double bv = a - s;
  const double av = s + bv;
  return {s, (a - av) + (bv - b)};
}

inline TwoTerm two_product(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

/// Adds `b` to a nonoverlapping expansion stored in increasing magnitude.
template <std::size_t N>
void grow_expansion(std::array<double, N>& e, std::size_t& len, double b) {
  double q = b;
  for (std::size_t i = 0; i < len; ++i) {
    const TwoTerm t = two_sum(q, e[i]);
    e[i] = t.lo;
    q = t.hi;
  }
  e[len++] = q;
}

}  // namespace detail

/// Positive when (a, b, c) turn counter-clockwise, negative when clockwise,
/// zero when collinear. The sign is exact.
inline double orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
  const double left = (ax - cx) * (by - cy);
  const double right = (ay - cy) * (bx - cx);
  const double det = left - right;
  const double bound = 3.3306690738754716e-16 * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return det;

  using detail::two_diff;
  using detail::two_product;
  const auto acx = two_diff(ax, cx);
  const auto bcy = two_diff(by, cy);
  const auto acy = two_diff(ay, cy);
  const auto bcx = two_diff(bx, cx);

  std::array<double, 17> e{};
  std::size_t len = 0;
  const double lf[2] = {acx.hi, acx.lo};
  const double rf[2] = {bcy.hi, bcy.lo};
  const double lg[2] = {acy.hi, acy.lo};
  const double rg[2] = {bcx.hi, bcx.lo};
  for (double x : lf) {
    for (double y : rf) {
      const auto p = two_product(x, y);
      detail::grow_expansion(e, len, p.lo);
      detail::grow_expansion(e, len, p.hi);
    }
  }
  for (double x : lg) {
    for (double y : rg) {
      const auto p = two_product(x, y);
      detail::grow_expansion(e, len, -p.lo);
      detail::grow_expansion(e, len, -p.hi);
    }
  }
  for (std::size_t i = len; i-- > 0;) {
    if (e[i] != 0.0) return e[i];
  }
  return 0.0;
}

/// Positive when d lies inside the circle through counter-clockwise (a, b, c).
/// Plain floating point; used only to decide edge flips.
inline double incircle(double ax, double ay, double bx, double by, double cx, double cy, double dx, double dy) {
  const double adx = ax - dx, ady = ay - dy;
  const double bdx = bx - dx, bdy = by - dy;
  const double cdx = cx - dx, cdy = cy - dy;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  return alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) + clift * (adx * bdy - ady * bdx);
}

}  // namespace trayscan::geometry::predicates
