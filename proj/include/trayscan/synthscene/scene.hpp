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
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "trayscan/core/error.hpp"
#include "trayscan/core/model.hpp"
#include "trayscan/core/taxonomy.hpp"
#include "trayscan/core/types.hpp"
#include "trayscan/geometry/plate.hpp"
#include "trayscan/geometry/point_cloud.hpp"

namespace trayscan::synthscene {

using geometry::PlateModel;
using geometry::Point3;

enum class Shape { kBox, kCap, kBump };

inline std::string_view shape_name(Shape s) {
  switch (s) {
    case Shape::kBox: return "box";
    case Shape::kCap: return "cap";
    case Shape::kBump: return "bump";
  }
  return "unknown";
}

/// splitmix64 step; used to derive independent per-meal and per-stage seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Pixels draw colours[0] with probability `mix`, otherwise colours[1], plus
/// per-channel Gaussian noise.
struct ColorSignature {
  std::array<Rgb, 2> colors{Rgb{128, 128, 128}, Rgb{128, 128, 128}};
  double mix = 0.5;
  double noise = 10.0;

  template <class Rng>
  Rgb sample(Rng& rng) const {
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    std::normal_distribution<double> n(0.0, noise);
    const Rgb& base = pick(rng) < mix ? colors[0] : colors[1];
    auto jitter = [&](std::uint8_t c) {
      return static_cast<std::uint8_t>(std::clamp(std::lround(c + n(rng)), 0l, 255l));
    };
    const std::uint8_t r = jitter(base.r);
    const std::uint8_t g = jitter(base.g);
    const std::uint8_t b = jitter(base.b);
    return {r, g, b};
  }
};

/// One food item sitting on a plate. Heights are measured above the plate
/// surface along the tray normal.
///   box:  sides size_x, size_y; height
///   cap:  spherical cap, base radius size_x; height
///   bump: height * (1 - rho^2)^2 over an ellipse with semi-axes size_x, size_y
struct FoodBlob {
  int instance = 1;
  int category = 0;
  Hyper hyper = Hyper::kMainCourse;
  Shape shape = Shape::kBox;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double rotation = 0.0;
  double size_x = 0.0;
  double size_y = 0.0;
  double height = 0.0;
  double density_g_per_ml = 1.0;
  NutrientVector per_100g;
  ColorSignature color;

  double volume_ml() const {
    switch (shape) {
      case Shape::kBox: return size_x * size_y * height / 1000.0;
      case Shape::kCap: return std::numbers::pi * height * (3.0 * size_x * size_x + height * height) / 6.0 / 1000.0;
      case Shape::kBump: return std::numbers::pi * size_x * size_y * height / 3.0 / 1000.0;
    }
    return 0.0;
  }

  Eigen::Vector2d local(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d d = p - center;
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
  }

  double height_at(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d q = local(p);
    switch (shape) {
      case Shape::kBox:
        return std::abs(q.x()) <= 0.5 * size_x && std::abs(q.y()) <= 0.5 * size_y ? height : 0.0;
      case Shape::kCap: {
        const double r2 = q.squaredNorm();
        if (r2 >= size_x * size_x || height <= 0.0) return 0.0;
        const double sphere = cap_sphere_radius();
        return std::max(std::sqrt(sphere * sphere - r2) - (sphere - height), 0.0);
      }
      case Shape::kBump: {
        const double rho2 = (q.x() / size_x) * (q.x() / size_x) + (q.y() / size_y) * (q.y() / size_y);
        if (rho2 >= 1.0) return 0.0;
        return height * (1.0 - rho2) * (1.0 - rho2);
      }
    }
    return 0.0;
  }

  double cap_sphere_radius() const { return (size_x * size_x + height * height) / (2.0 * height); }

  double footprint_radius() const {
    switch (shape) {
      case Shape::kBox: return 0.5 * std::hypot(size_x, size_y);
      case Shape::kCap: return size_x;
      case Shape::kBump: return std::max(size_x, size_y);
    }
    return 0.0;
  }

  /// Lipschitz bound of height_at for the continuous shapes.
  double max_slope() const {
    switch (shape) {
      case Shape::kBox: return 0.0;
      case Shape::kCap: {
        if (height <= 0.0) return 0.0;
        const double below = cap_sphere_radius() - height;
        return size_x / std::max(below, 1e-3 * size_x);
      }
      case Shape::kBump:
        // max |d/dr A(1 - r^2/a^2)^2| = 8A / (3 sqrt(3) a)
        return 8.0 * height / (3.0 * std::sqrt(3.0) * std::min(size_x, size_y));
    }
    return 0.0;
  }

  void validate() const {
    const std::string ctx = "food blob " + std::to_string(instance);
    if (instance <= 0 || instance > 65535) throw ValidationError(ctx + ": instance id must be in [1, 65535]");
    if (!(size_x > 0.0) || (shape != Shape::kCap && !(size_y > 0.0))) throw ValidationError(ctx + ": non-positive size");
    if (!(height >= 0.0)) throw ValidationError(ctx + ": negative height");
    if (shape == Shape::kCap && height > size_x) throw ValidationError(ctx + ": cap taller than a hemisphere");
    if (!(density_g_per_ml > 0.0)) throw ValidationError(ctx + ": density must be positive");
    if (!center.allFinite() || !std::isfinite(rotation)) throw ValidationError(ctx + ": non-finite placement");
  }
};

/// Contents of a sealed container: visible as food, invisible to depth.
struct SealedContents {
  int instance = 1;
  int category = 0;
  Hyper hyper = Hyper::kSauce;
  double portion_g = 30.0;
  double remaining = 1.0;
  double density_g_per_ml = 1.0;
  NutrientVector per_100g;
  ColorSignature color;
};

struct PlatePlacement {
  PlateType type = PlateType::kMainPlate;
  /// Tray-plane coordinates, mm.
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  PlateModel model;
  std::vector<FoodBlob> foods;
  std::optional<SealedContents> sealed;

  bool flat() const {
    return std::all_of(model.profile.begin(), model.profile.end(), [](const auto& k) { return k.second == 0.0; });
  }

  double profile_slope() const {
    double s = 0.0;
    for (std::size_t i = 1; i < model.profile.size(); ++i) {
      const auto& [r0, d0] = model.profile[i - 1];
      const auto& [r1, d1] = model.profile[i];
      s = std::max(s, std::abs(d1 - d0) / (r1 - r0));
    }
    return s;
  }
};

/// Camera sits at the origin looking down +z. The tray origin lies on the
/// optical axis at `distance_mm`; the tray is tilted by `tilt_deg` about an
/// in-image axis at `azimuth_deg`.
struct TrayPose {
  double distance_mm = 420.0;
  double tilt_deg = 5.0;
  double azimuth_deg = 0.0;
};

struct TrayFrame {
  Point3 origin;
  Eigen::Vector3d e1, e2, normal;

  explicit TrayFrame(const TrayPose& pose) {
    const double az = pose.azimuth_deg * std::numbers::pi / 180.0;
    const Eigen::AngleAxisd tilt(pose.tilt_deg * std::numbers::pi / 180.0,
                                 Eigen::Vector3d(std::cos(az), std::sin(az), 0.0));
    origin = Point3(0.0, 0.0, pose.distance_mm);
    e1 = tilt * Eigen::Vector3d::UnitX();
    e2 = tilt * Eigen::Vector3d(0.0, -1.0, 0.0);
    normal = tilt * Eigen::Vector3d(0.0, 0.0, -1.0);
  }

  Point3 to_camera(double x, double y, double h) const { return origin + x * e1 + y * e2 + h * normal; }
  Eigen::Vector3d to_tray(const Point3& p) const {
    const Eigen::Vector3d d = p - origin;
    return {e1.dot(d), e2.dot(d), normal.dot(d)};
  }
  Eigen::Vector3d direction_to_tray(const Eigen::Vector3d& d) const { return {e1.dot(d), e2.dot(d), normal.dot(d)}; }
};

inline constexpr Rgb kTrayColor{70, 95, 150};
inline constexpr Rgb kPlateColor{225, 225, 220};

struct SceneSpec {
  CameraIntrinsics camera;
  TrayPose pose;
  std::vector<PlatePlacement> plates;
  /// Gaussian depth noise at 400 mm; scales with the square of depth.
  double noise_sigma_mm = 0.0;
  double dropout = 0.0;

  void validate() const {
    camera.validate();
    if (!(pose.distance_mm > 0.0)) throw ValidationError("scene: tray distance must be positive");
    if (!(pose.tilt_deg >= 0.0 && pose.tilt_deg < 60.0)) throw ValidationError("scene: tilt must be in [0, 60) degrees");
    if (!(noise_sigma_mm >= 0.0)) throw ValidationError("scene: negative noise sigma");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("scene: dropout must be in [0, 1)");
    std::set<int> instances;
    auto claim = [&](int id) {
      if (!instances.insert(id).second) throw ValidationError("scene: duplicate instance id " + std::to_string(id));
    };
    for (std::size_t i = 0; i < plates.size(); ++i) {
      const auto& p = plates[i];
      p.model.validate();
      const double R = p.model.rim_radius_mm;
      for (std::size_t j = 0; j < i; ++j) {
        if ((plates[j].center - p.center).norm() < R + plates[j].model.rim_radius_mm) {
          throw ValidationError("scene: plates " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
        }
      }
      if (p.sealed) {
        if (p.type != PlateType::kPackagedContainer) throw ValidationError("scene: sealed contents outside a container");
        if (!p.foods.empty()) throw ValidationError("scene: a sealed container cannot hold open food");
        if (!(p.sealed->remaining >= 0.0 && p.sealed->remaining <= 1.0)) {
          throw ValidationError("scene: sealed remaining fraction outside [0, 1]");
        }
        claim(p.sealed->instance);
      }
      for (std::size_t k = 0; k < p.foods.size(); ++k) {
        const auto& f = p.foods[k];
        f.validate();
        claim(f.instance);
        if ((f.center - p.center).norm() + f.footprint_radius() > R) {
          throw ValidationError("scene: food " + std::to_string(f.instance) + " extends past its plate rim");
        }
        if (f.shape == Shape::kBox && !p.flat()) throw ValidationError("scene: boxes need a flat plate");
        for (std::size_t m = 0; m < k; ++m) {
          if ((p.foods[m].center - f.center).norm() < p.foods[m].footprint_radius() + f.footprint_radius()) {
            throw ValidationError("scene: foods " + std::to_string(p.foods[m].instance) + " and " +
                                  std::to_string(f.instance) + " overlap");
          }
        }
      }
    }
  }
};

struct ItemTruth {
  int instance = 0;
  int category = 0;
  Hyper hyper = Hyper::kMainCourse;
  PlateType plate = PlateType::kMainPlate;
  /// Empty for sealed contents.
  std::optional<Shape> shape;
  double volume_ml = 0.0;
  double weight_g = 0.0;
  NutrientVector nutrients;
};

struct GroundTruth {
  std::vector<ItemTruth> items;
  NutrientVector total;

  const ItemTruth* find(int instance) const {
    for (const auto& it : items)
      if (it.instance == instance) return &it;
    return nullptr;
  }
};

/// Closed-form truth for every item in the scene, in placement order.
inline GroundTruth scene_truth(const SceneSpec& spec) {
  GroundTruth gt;
  for (const auto& p : spec.plates) {
    for (const auto& f : p.foods) {
      ItemTruth t{f.instance, f.category, f.hyper, p.type, f.shape, f.volume_ml(), 0.0, {}};
      t.weight_g = f.density_g_per_ml * t.volume_ml;
      t.nutrients = (t.weight_g / 100.0) * f.per_100g;
      gt.items.push_back(t);
    }
    if (p.sealed) {
      const auto& s = *p.sealed;
      ItemTruth t{s.instance, s.category, s.hyper, p.type, std::nullopt, 0.0, s.portion_g * s.remaining, {}};
      t.volume_ml = t.weight_g / s.density_g_per_ml;
      t.nutrients = (t.weight_g / 100.0) * s.per_100g;
      gt.items.push_back(t);
    }
  }
  for (const auto& t : gt.items) gt.total += t.nutrients;
  return gt;
}

/// Noise-free render: depth in mm (0 where nothing is hit) and per-pixel truth.
struct IdealRender {
  Raster<double> depth;
  LabelMap food;
  LabelMap plate;
  Raster<std::uint16_t> instances;
};

namespace detail {

inline constexpr double kHitTolerance = 1e-3;

struct Ray {
  Eigen::Vector3d origin;  // tray frame
  Eigen::Vector3d dir;     // tray frame; camera-frame z component is 1, so t is depth

  Eigen::Vector3d at(double t) const { return origin + t * dir; }
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int plate = -1;
  int food = -1;  // index into the plate's foods; -1 for bare plate
};

/// Entry parameter of the ray into an upright box over the flat plate, or nothing.
inline std::optional<double> box_entry(const Ray& ray, const FoodBlob& b, double base, double t_min, double t_max) {
  const Eigen::Vector2d o = b.local(ray.origin.head<2>());
  const double c = std::cos(b.rotation), s = std::sin(b.rotation);
  const Eigen::Vector2d d(c * ray.dir.x() + s * ray.dir.y(), -s * ray.dir.x() + c * ray.dir.y());
  const std::array<double, 3> lo{-0.5 * b.size_x, -0.5 * b.size_y, base};
  const std::array<double, 3> hi{0.5 * b.size_x, 0.5 * b.size_y, base + b.height};
  const std::array<double, 3> org{o.x(), o.y(), ray.origin.z()};
  const std::array<double, 3> dir{d.x(), d.y(), ray.dir.z()};
  double t0 = t_min, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (org[a] < lo[a] || org[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - org[a]) / dir[a], tb = (hi[a] - org[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

inline double continuous_surface(const PlatePlacement& p, const Eigen::Vector2d& xy) {
  double h = p.model.surface_height((xy - p.center).norm());
  for (const auto& f : p.foods) {
    if (f.shape != Shape::kBox) h += f.height_at(xy);
  }
  return h;
}

inline void trace_plate(const Ray& ray, const PlatePlacement& p, int plate_index, Hit& best) {
  const double R = p.model.rim_radius_mm;
  double top = p.model.rim_height_mm;
  double slope = 0.0;
  for (const auto& f : p.foods) {
    top = std::max(top, p.model.rim_height_mm + f.height);
    if (f.shape != Shape::kBox) slope = std::max(slope, f.max_slope());
  }
  slope += p.profile_slope();

  // Cylinder interval in the tray plane.
  const Eigen::Vector2d oc = ray.origin.head<2>() - p.center;
  const Eigen::Vector2d dxy = ray.dir.head<2>();
  const double a = dxy.squaredNorm();
  const double b = 2.0 * dxy.dot(oc);
  const double c = oc.squaredNorm() - R * R;
  double t_in = -std::numeric_limits<double>::infinity(), t_out = std::numeric_limits<double>::infinity();
  if (a > 1e-18) {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return;
    const double sq = std::sqrt(disc);
    t_in = (-b - sq) / (2.0 * a);
    t_out = (-b + sq) / (2.0 * a);
  } else if (c > 0.0) {
    return;
  }
  if (!(ray.dir.z() < 0.0)) return;
  const double t_top = (top - ray.origin.z()) / ray.dir.z();
  const double t_floor = -ray.origin.z() / ray.dir.z();
  const double t_start = std::max({t_in, t_top, 0.0});
  const double t_end = std::min({t_out, t_floor, best.t});
  if (t_start > t_end) return;

  Hit local;
  for (std::size_t k = 0; k < p.foods.size(); ++k) {
    const auto& f = p.foods[k];
    if (f.shape != Shape::kBox) continue;
    if (auto t = box_entry(ray, f, p.model.rim_height_mm, t_start, std::min(t_end, local.t))) {
      local = Hit{*t, plate_index, static_cast<int>(k)};
    }
  }

  const double rate = std::abs(ray.dir.z()) + slope * std::sqrt(a);
  const double t_limit = std::min(t_end, local.t);
  double t = t_start;
  for (int iter = 0; iter < 100000 && t <= t_limit; ++iter) {
    const Eigen::Vector3d q = ray.at(t);
    const double f = q.z() - continuous_surface(p, q.head<2>());
    if (f < kHitTolerance) {
      local = Hit{t, plate_index, -1};
      break;
    }
    t += f / rate;
  }
  if (local.plate < 0 || local.t >= best.t) return;
  if (local.food < 0) {
    const Eigen::Vector2d xy = ray.at(local.t).head<2>();
    double h = 0.0;
    for (std::size_t k = 0; k < p.foods.size(); ++k) {
      const double hk = p.foods[k].shape == Shape::kBox ? 0.0 : p.foods[k].height_at(xy);
      if (hk > h) h = hk, local.food = static_cast<int>(k);
    }
  }
  best = local;
}

}  // namespace detail

inline IdealRender render_ideal(const SceneSpec& spec) {
  spec.validate();
  const CameraIntrinsics& k = spec.camera;
  const TrayFrame frame(spec.pose);
  IdealRender out{Raster<double>(k.width, k.height, 0.0), LabelMap(k.width, k.height, 0),
                  LabelMap(k.width, k.height, 0), Raster<std::uint16_t>(k.width, k.height, 0)};
  const Eigen::Vector3d cam = frame.to_tray(Point3::Zero());
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const detail::Ray ray{cam, frame.direction_to_tray(d)};
      detail::Hit hit;
      if (ray.dir.z() < 0.0) hit.t = -ray.origin.z() / ray.dir.z();
      for (std::size_t i = 0; i < spec.plates.size(); ++i) {
        detail::trace_plate(ray, spec.plates[i], static_cast<int>(i), hit);
      }
      if (!std::isfinite(hit.t)) continue;
      out.depth(u, v) = hit.t;
      if (hit.plate < 0) continue;
      const auto& p = spec.plates[hit.plate];
      out.plate(u, v) = static_cast<std::uint8_t>(p.type);
      if (hit.food >= 0) {
        out.food(u, v) = static_cast<std::uint8_t>(p.foods[hit.food].hyper);
        out.instances(u, v) = static_cast<std::uint16_t>(p.foods[hit.food].instance);
      } else if (p.sealed) {
        out.food(u, v) = static_cast<std::uint8_t>(p.sealed->hyper);
        out.instances(u, v) = static_cast<std::uint16_t>(p.sealed->instance);
      }
    }
  }
  return out;
}

/// Quantizes ideal depth to whole millimetres after adding noise with
/// sigma * (z / 400)^2 and dropping a fraction of returns.
inline DepthImage apply_depth_noise(const Raster<double>& ideal, double sigma_mm, double dropout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> drop(0.0, 1.0);
  DepthImage out(ideal.width(), ideal.height(), 0);
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    const double z = ideal.data()[i];
    const double e = n(rng);
    const bool lost = drop(rng) < dropout;
    if (!(z > 0.0) || lost) continue;
    const double s = sigma_mm * (z / 400.0) * (z / 400.0);
    out.data()[i] = static_cast<std::uint16_t>(std::clamp(std::lround(z + s * e), 1l, 65535l));
  }
  return out;
}

struct RenderedScene {
  DepthImage depth;
  LabelMap food;
  LabelMap plate;
  Raster<std::uint16_t> instances;
  ColorImage color;
  GroundTruth truth;
};

/// Renders the scene and applies sensor noise; deterministic per (spec, seed).
inline RenderedScene generate(const SceneSpec& spec, std::uint64_t seed) {
  IdealRender ideal = render_ideal(spec);
  RenderedScene out;
  out.depth = apply_depth_noise(ideal.depth, spec.noise_sigma_mm, spec.dropout, derive_seed(seed, 0));
  out.color = ColorImage(spec.camera.width, spec.camera.height);
  std::map<int, const ColorSignature*> colors;
  for (const auto& p : spec.plates) {
    for (const auto& f : p.foods) colors[f.instance] = &f.color;
    if (p.sealed) colors[p.sealed->instance] = &p.sealed->color;
  }
  const ColorSignature tray{{kTrayColor, kTrayColor}, 1.0, 6.0};
  const ColorSignature plate{{kPlateColor, kPlateColor}, 1.0, 6.0};
  std::mt19937_64 rng(derive_seed(seed, 1));
  for (std::size_t i = 0; i < ideal.depth.size(); ++i) {
    const int inst = ideal.instances.data()[i];
    const ColorSignature& sig = inst ? *colors.at(inst) : ideal.plate.data()[i] ? plate : tray;
    out.color.data()[i] = sig.sample(rng);
  }
  out.food = std::move(ideal.food);
  out.plate = std::move(ideal.plate);
  out.instances = std::move(ideal.instances);
  out.truth = scene_truth(spec);
  return out;
}

// ---------------------------------------------------------------------------
// Meal pairs

/// Cap height with the given base radius whose volume is `target_ml`.
inline double cap_height_for_volume(double base_radius, double target_ml) {
  FoodBlob cap;
  cap.shape = Shape::kCap;
  cap.size_x = base_radius;
  double lo = 0.0, hi = base_radius;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    cap.height = mid;
    (cap.volume_ml() < target_ml ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// After-meal spec: every item keeps (1 - fraction) of its volume at the same
/// footprint. Items with fraction 1 disappear; missing instances are untouched.
inline SceneSpec consume(const SceneSpec& before, const std::map<int, double>& fractions) {
  for (const auto& [id, f] : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ValidationError("consumption fraction for item " + std::to_string(id) + " outside [0, 1]");
    }
  }
  auto fraction_of = [&](int id) {
    auto it = fractions.find(id);
    return it == fractions.end() ? 0.0 : it->second;
  };
  SceneSpec after = before;
  for (auto& p : after.plates) {
    std::vector<FoodBlob> kept;
    for (FoodBlob f : p.foods) {
      const double keep = 1.0 - fraction_of(f.instance);
      if (keep <= 0.0) continue;
      if (f.shape == Shape::kCap) {
        f.height = cap_height_for_volume(f.size_x, keep * f.volume_ml());
      } else {
        f.height *= keep;
      }
      kept.push_back(f);
    }
    p.foods = std::move(kept);
    if (p.sealed) p.sealed->remaining *= 1.0 - fraction_of(p.sealed->instance);
  }
  return after;
}

struct ItemConsumption {
  int instance = 0;
  int category = 0;
  Hyper hyper = Hyper::kMainCourse;
  PlateType plate = PlateType::kMainPlate;
  std::optional<Shape> shape;
  double before_ml = 0.0;
  double after_ml = 0.0;
  double consumed_ml = 0.0;
  double before_g = 0.0;
  double consumed_g = 0.0;
  double consumed_fraction = 0.0;
  NutrientVector nutrients;
};

struct PairTruth {
  std::vector<ItemConsumption> items;
  NutrientVector total;
};

/// Consumed truth as before minus after, item by item.
inline PairTruth pair_truth(const GroundTruth& before, const GroundTruth& after) {
  PairTruth out;
  for (const auto& b : before.items) {
    const ItemTruth* a = after.find(b.instance);
    ItemConsumption c{b.instance, b.category, b.hyper, b.plate, b.shape, b.volume_ml, 0.0, 0.0, b.weight_g, 0.0, 0.0, {}};
    NutrientVector left;
    double left_g = 0.0;
    if (a) {
      c.after_ml = a->volume_ml;
      left_g = a->weight_g;
      left = a->nutrients;
    }
    c.consumed_ml = c.before_ml - c.after_ml;
    c.consumed_g = b.weight_g - left_g;
    c.consumed_fraction = b.weight_g > 0.0 ? c.consumed_g / b.weight_g : 0.0;
    c.nutrients = b.nutrients - left;
    out.total += c.nutrients;
    out.items.push_back(c);
  }
  return out;
}

struct MealPair {
  SceneSpec before_spec;
  SceneSpec after_spec;
  RenderedScene before;
  RenderedScene after;
  PairTruth consumed;
};

inline MealPair generate_meal_pair(const SceneSpec& spec, const std::map<int, double>& fractions, std::uint64_t seed) {
  MealPair m;
  m.before_spec = spec;
  m.after_spec = consume(spec, fractions);
  m.before = generate(m.before_spec, derive_seed(seed, 10));
  m.after = generate(m.after_spec, derive_seed(seed, 11));
  m.consumed = pair_truth(m.before.truth, m.after.truth);
  return m;
}

}  // namespace trayscan::synthscene
