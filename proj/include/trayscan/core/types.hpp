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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trayscan/core/error.hpp"

namespace trayscan {

/// Pinhole camera model. Pixel (u, v) with depth z maps to
/// ((u - cx) z / fx, (v - cy) z / fy, z).
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw ValidationError("intrinsics: focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
      throw ValidationError("intrinsics: raster dimensions must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw ValidationError("intrinsics: principal point outside raster");
    }
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  bool operator==(const PixelCoord&) const = default;
  auto operator<=>(const PixelCoord& o) const {
    // scanline order
    if (auto c = v <=> o.v; c != 0) return c;
    return u <=> o.u;
  }
};

using PixelRegion = std::vector<PixelCoord>;

/// Dense row-major raster.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw ValidationError("raster: negative dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }

  T& at(int u, int v) { return data_[index(u, v)]; }
  const T& at(int u, int v) const { return data_[index(u, v)]; }
  T& operator()(int u, int v) { return at(u, v); }
  const T& operator()(int u, int v) const { return at(u, v); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Raster<U>& o) const { return same_shape(o.width(), o.height()); }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Depth in millimetres; 0 marks a missing return.
using DepthImage = Raster<std::uint16_t>;
/// Category indices; 0 is background.
using LabelMap = Raster<std::uint8_t>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};
using ColorImage = Raster<Rgb>;

struct DepthRange {
  std::uint16_t min_mm = 100;
  std::uint16_t max_mm = 2000;
  bool valid(std::uint16_t z) const { return z != 0 && z >= min_mm && z <= max_mm; }
};

/// Consumable nutrients in the order used by every table and CSV.
struct NutrientVector {
  double kcal = 0.0;
  double cho_g = 0.0;
  double fat_g = 0.0;
  double protein_g = 0.0;
  double salt_g = 0.0;
  double fiber_g = 0.0;

  static constexpr std::size_t kCount = 6;
  static constexpr std::array<std::string_view, kCount> kNames = {
      "kcal", "cho_g", "fat_g", "protein_g", "salt_g", "fiber_g"};

  double& operator[](std::size_t i) {
    switch (i) {
      case 0: return kcal;
      case 1: return cho_g;
      case 2: return fat_g;
      case 3: return protein_g;
      case 4: return salt_g;
      default: return fiber_g;
    }
  }
  double operator[](std::size_t i) const { return const_cast<NutrientVector&>(*this)[i]; }

  NutrientVector& operator+=(const NutrientVector& o) {
    for (std::size_t i = 0; i < kCount; ++i) (*this)[i] += o[i];
    return *this;
  }
  friend NutrientVector operator+(NutrientVector a, const NutrientVector& b) { return a += b; }
  friend NutrientVector operator-(NutrientVector a, const NutrientVector& b) {
    for (std::size_t i = 0; i < kCount; ++i) a[i] -= b[i];
    return a;
  }
  friend NutrientVector operator*(double s, NutrientVector a) {
    for (std::size_t i = 0; i < kCount; ++i) a[i] *= s;
    return a;
  }

  bool finite() const {
    for (std::size_t i = 0; i < kCount; ++i) {
      if (!std::isfinite((*this)[i])) return false;
    }
    return true;
  }

  NutrientVector clamped_nonnegative() const {
    NutrientVector out = *this;
    for (std::size_t i = 0; i < kCount; ++i) out[i] = std::max(out[i], 0.0);
    return out;
  }

  bool operator==(const NutrientVector&) const = default;
};

}  // namespace trayscan
