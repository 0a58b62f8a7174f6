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
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "trayscan/core/model.hpp"
#include "trayscan/core/taxonomy.hpp"
#include "trayscan/core/types.hpp"

namespace trayscan {

inline constexpr int kDefaultMinItemArea = 200;

struct LabeledComponent {
  int label = 0;
  PixelRegion region;  // scanline order
};

/// 8-connected components of equal non-zero label, ordered by the scanline
/// position of each component's first pixel. Components smaller than
/// `min_area` are dropped.
template <typename T>
std::vector<LabeledComponent> connected_components(const Raster<T>& labels, int min_area) {
  const int w = labels.width();
  const int h = labels.height();
  std::vector<std::uint8_t> seen(labels.size(), 0);
  std::vector<LabeledComponent> out;
  std::vector<PixelCoord> stack;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      const T label = labels.data()[idx];
      if (label == 0 || seen[idx]) continue;
      LabeledComponent comp;
      comp.label = static_cast<int>(label);
      seen[idx] = 1;
      stack.assign(1, PixelCoord{u, v});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        comp.region.push_back(p);
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = p.u + du, nv = p.v + dv;
            if ((du == 0 && dv == 0) || !labels.contains(nu, nv)) continue;
            const std::size_t nidx = static_cast<std::size_t>(nv) * w + nu;
            if (seen[nidx] || labels.data()[nidx] != label) continue;
            seen[nidx] = 1;
            stack.push_back(PixelCoord{nu, nv});
          }
        }
      }
      if (static_cast<int>(comp.region.size()) < min_area) continue;
      std::sort(comp.region.begin(), comp.region.end());
      out.push_back(std::move(comp));
    }
  }
  return out;
}

inline void validate_labels(const LabelMap& map, bool food, const std::string& name) {
  for (int v = 0; v < map.height(); ++v) {
    for (int u = 0; u < map.width(); ++u) {
      const int l = map(u, v);
      if (l == 0) continue;
      if (food ? !is_hyper_index(l) : !is_plate_index(l)) {
        throw ValidationError(name + ": unknown label index " + std::to_string(l) + " at pixel (" +
                              std::to_string(u) + "," + std::to_string(v) + ")");
      }
    }
  }
}

/// Splits a hyper-category label map into food items.
inline std::vector<FoodItem> extract_items(const LabelMap& food_map, int min_area = kDefaultMinItemArea) {
  std::vector<FoodItem> items;
  for (auto& comp : connected_components(food_map, min_area)) {
    FoodItem item;
    item.hyper = hyper_from_index(comp.label);
    item.region = std::move(comp.region);
    items.push_back(std::move(item));
  }
  return items;
}

/// Binary mask of a region, same shape as the raster it came from.
class RegionMask {
 public:
  RegionMask(int width, int height, const PixelRegion& region)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {
    for (const auto& p : region) bits_[index(p.u, p.v)] = 1;
  }

  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width_ && v < height_ && bits_[index(u, v)] != 0;
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width_ + u; }
  int width_, height_;
  std::vector<std::uint8_t> bits_;
};

/// Pixels of the region with at least one 8-neighbour outside it.
inline PixelRegion region_boundary(const PixelRegion& region, const RegionMask& mask) {
  PixelRegion out;
  for (const auto& p : region) {
    bool edge = false;
    for (int dv = -1; dv <= 1 && !edge; ++dv) {
      for (int du = -1; du <= 1 && !edge; ++du) {
        if (!mask.contains(p.u + du, p.v + dv)) edge = true;
      }
    }
    if (edge) out.push_back(p);
  }
  return out;
}

struct FilledDepth {
  /// Depth per region pixel, same order as the region.
  std::vector<std::uint16_t> depth;
  std::size_t invalid_count = 0;
  bool unusable = false;
};

/// Replaces missing depth inside a region by the nearest valid pixel of the
/// same region (breadth-first, 8-connected). More than `max_invalid_fraction`
/// missing marks the region unusable.
inline FilledDepth fill_region_depth(const DepthImage& depth, const PixelRegion& region,
                                     DepthRange range = {}, double max_invalid_fraction = 0.5) {
  FilledDepth out;
  out.depth.resize(region.size());
  if (region.empty()) {
    out.unusable = true;
    return out;
  }
  const int w = depth.width();
  std::vector<int> slot(depth.size(), -1);
  std::deque<std::size_t> frontier;
  std::vector<std::uint8_t> known(region.size(), 0);
  for (std::size_t i = 0; i < region.size(); ++i) {
    const auto& p = region[i];
    slot[static_cast<std::size_t>(p.v) * w + p.u] = static_cast<int>(i);
    const std::uint16_t z = depth(p.u, p.v);
    if (range.valid(z)) {
      out.depth[i] = z;
      known[i] = 1;
      frontier.push_back(i);
    } else {
      ++out.invalid_count;
    }
  }
  if (static_cast<double>(out.invalid_count) > max_invalid_fraction * static_cast<double>(region.size())) {
    out.unusable = true;
  }
  if (frontier.empty()) {
    out.unusable = true;
    return out;
  }
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    const auto& p = region[i];
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        const int nu = p.u + du, nv = p.v + dv;
        if (!depth.contains(nu, nv)) continue;
        const int j = slot[static_cast<std::size_t>(nv) * w + nu];
        if (j < 0 || known[j]) continue;
        known[j] = 1;
        out.depth[j] = out.depth[i];
        frontier.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return out;
}

}  // namespace trayscan
