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
#include <filesystem>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trayscan/core/loaders.hpp"
#include "trayscan/core/parallel.hpp"
#include "trayscan/core/raster_io.hpp"
#include "trayscan/core/text_io.hpp"
#include "trayscan/geometry/plate.hpp"
#include "trayscan/protonet/embedding.hpp"
#include "trayscan/protonet/io.hpp"
#include "trayscan/synthscene/scene.hpp"

namespace trayscan::synthscene {

inline constexpr const char* kDatasetVersion = "1";

struct CategoryProfile {
  Recipe recipe;
  ColorSignature color;
  Shape shape = Shape::kCap;
};

class CategoryPool {
 public:
  CategoryPool() = default;
  explicit CategoryPool(std::vector<CategoryProfile> cats) : cats_(std::move(cats)) {
    if (cats_.empty()) throw ValidationError("category pool is empty");
    for (std::size_t i = 0; i < cats_.size(); ++i) {
      const int id = cats_[i].recipe.category_id;
      if (!index_.emplace(id, i).second) throw ValidationError("category pool: duplicate id " + std::to_string(id));
      by_hyper_[cats_[i].recipe.hyper].push_back(id);
    }
    for (auto& [h, ids] : by_hyper_) std::sort(ids.begin(), ids.end());
  }

  const std::vector<CategoryProfile>& categories() const { return cats_; }
  const CategoryProfile& at(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("category pool: unknown id " + std::to_string(id));
    return cats_[it->second];
  }
  /// Ascending ids; the rank order used for long-tail sampling.
  const std::vector<int>& of(Hyper h) const {
    static const std::vector<int> kEmpty;
    auto it = by_hyper_.find(h);
    return it == by_hyper_.end() ? kEmpty : it->second;
  }
  std::size_t size() const { return cats_.size(); }

  RecipeBook recipes() const {
    RecipeBook book;
    for (const auto& c : cats_) book.add(c.recipe);
    return book;
  }

 private:
  std::vector<CategoryProfile> cats_;
  std::map<int, std::size_t> index_;
  std::map<Hyper, std::vector<int>> by_hyper_;
};

namespace detail {

struct Range {
  double lo, hi;
};

inline Range density_range(Hyper h) {
  switch (h) {
    case Hyper::kMainCourse: return {0.8, 1.1};
    case Hyper::kSideDish: return {0.7, 0.9};
    case Hyper::kVegetable: return {0.5, 0.8};
    case Hyper::kSauce: return {1.0, 1.1};
    case Hyper::kSoup: return {0.95, 1.05};
    case Hyper::kSalad: return {0.3, 0.6};
    case Hyper::kDessert: return {0.6, 1.0};
  }
  return {1.0, 1.0};
}

inline std::vector<Shape> shapes_for(Hyper h) {
  switch (h) {
    case Hyper::kMainCourse: return {Shape::kBox, Shape::kBump};
    case Hyper::kSideDish: return {Shape::kCap, Shape::kBox};
    case Hyper::kVegetable: return {Shape::kBump, Shape::kBox};
    case Hyper::kSoup: return {Shape::kCap};
    case Hyper::kSalad: return {Shape::kBump};
    case Hyper::kDessert: return {Shape::kCap, Shape::kBump};
    case Hyper::kSauce: return {Shape::kCap};
  }
  return {Shape::kCap};
}

inline constexpr std::uint8_t kBinCentres[3] = {42, 128, 213};

inline Rgb bin_colour(int code) {
  return {kBinCentres[code / 9], kBinCentres[(code / 3) % 3], kBinCentres[code % 3]};
}

}  // namespace detail

/// `count` categories dealt round-robin over the hyper categories. Each gets
/// a distinct pair of histogram-bin colours, a nutrient profile and a shape.
inline CategoryPool make_category_pool(int count, std::uint64_t seed) {
  if (count <= 0) throw ValidationError("category pool size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  // 26 usable bins (the plate's bin is excluded) give 325 colour pairs.
  std::vector<std::pair<int, int>> pairs;
  const int plate_bin = 26;
  for (int a = 0; a < 27; ++a)
    for (int b = a + 1; b < 27; ++b)
      if (a != plate_bin && b != plate_bin) pairs.emplace_back(a, b);
  if (static_cast<std::size_t>(count) > pairs.size()) {
    throw ValidationError("category pool size is limited to " + std::to_string(pairs.size()));
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);

  std::vector<CategoryProfile> cats;
  std::map<Hyper, int> next;
  for (int i = 0; i < count; ++i) {
    const Hyper h = kAllHypers[i % kHyperCount];
    CategoryProfile c;
    c.recipe.category_id = static_cast<int>(h) * 100 + ++next[h];
    c.recipe.hyper = h;
    NutrientVector& n = c.recipe.per_100g;
    n.cho_g = in(2.0, 30.0);
    n.fat_g = in(0.5, 15.0);
    n.protein_g = in(0.5, 20.0);
    n.fiber_g = in(0.2, 4.0);
    n.salt_g = in(0.1, 1.5);
    n.kcal = 4.0 * n.cho_g + 9.0 * n.fat_g + 4.0 * n.protein_g + 2.0 * n.fiber_g;
    const auto d = detail::density_range(h);
    c.recipe.density_g_per_ml = in(d.lo, d.hi);
    if (h == Hyper::kSauce) c.recipe.portion_g = in(20.0, 40.0);
    c.color.colors = {detail::bin_colour(pairs[i].first), detail::bin_colour(pairs[i].second)};
    c.color.mix = in(0.3, 0.7);
    c.color.noise = 8.0;
    const auto shapes = detail::shapes_for(h);
    c.shape = shapes[static_cast<std::size_t>(in(0.0, static_cast<double>(shapes.size()))) % shapes.size()];
    cats.push_back(c);
  }
  return CategoryPool(std::move(cats));
}

/// P(rank k) proportional to k^-s, k = 1..n.
inline std::vector<double> zipf_probabilities(std::size_t n, double exponent) {
  std::vector<double> p(n);
  double z = 0.0;
  for (std::size_t k = 0; k < n; ++k) z += p[k] = std::pow(static_cast<double>(k + 1), -exponent);
  for (auto& v : p) v /= z;
  return p;
}

struct DatasetOptions {
  int meals = 10;
  int categories = 76;
  std::uint64_t seed = 7;
  double zipf_exponent = 1.1;
  int meals_per_day = 4;
  int menu_size = 7;
  double test_fraction = 0.75;
  double noise_sigma_mm = 1.5;
  double dropout = 0.02;
  int support_shots = 3;
  double full_consumption_prob = 0.15;
  double dessert_prob = 0.7;
  double container_prob = 0.6;
  double density_jitter = 0.05;
  CameraIntrinsics camera;
  int workers = 1;

  void validate() const {
    if (meals <= 0) throw ValidationError("dataset: meals must be positive");
    if (categories <= 0) throw ValidationError("dataset: categories must be positive");
    if (!(zipf_exponent >= 0.0)) throw ValidationError("dataset: zipf exponent must be non-negative");
    if (meals_per_day <= 0 || menu_size <= 0) throw ValidationError("dataset: meals_per_day and menu_size must be positive");
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ValidationError("dataset: test_fraction outside [0, 1]");
    if (!(noise_sigma_mm >= 0.0)) throw ValidationError("dataset: negative noise");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dataset: dropout outside [0, 1)");
    if (support_shots <= 0) throw ValidationError("dataset: support_shots must be positive");
    for (double p : {full_consumption_prob, dessert_prob, container_prob}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("dataset: probabilities must lie in [0, 1]");
    }
    if (!(density_jitter >= 0.0 && density_jitter < 1.0)) throw ValidationError("dataset: density_jitter outside [0, 1)");
    camera.validate();
  }
};

inline io::Json dataset_options_to_json(const DatasetOptions& o) {
  return io::Json{{"meals", o.meals},
                  {"categories", o.categories},
                  {"seed", o.seed},
                  {"zipf_exponent", o.zipf_exponent},
                  {"meals_per_day", o.meals_per_day},
                  {"menu_size", o.menu_size},
                  {"test_fraction", o.test_fraction},
                  {"noise_sigma_mm", o.noise_sigma_mm},
                  {"dropout", o.dropout},
                  {"support_shots", o.support_shots},
                  {"full_consumption_prob", o.full_consumption_prob},
                  {"dessert_prob", o.dessert_prob},
                  {"container_prob", o.container_prob},
                  {"density_jitter", o.density_jitter},
                  {"camera", intrinsics_to_json(o.camera)}};
}

/// Reads the keys present in `j` over `base`; unknown keys are rejected.
inline DatasetOptions dataset_options_from_json(const io::Json& j, DatasetOptions base = {},
                                                const std::string& name = "dataset options") {
  if (!j.is_object()) throw ValidationError(name + ": expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "meals") base.meals = v.get<int>();
      else if (key == "categories") base.categories = v.get<int>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "zipf_exponent") base.zipf_exponent = v.get<double>();
      else if (key == "meals_per_day") base.meals_per_day = v.get<int>();
      else if (key == "menu_size") base.menu_size = v.get<int>();
      else if (key == "test_fraction") base.test_fraction = v.get<double>();
      else if (key == "noise_sigma_mm") base.noise_sigma_mm = v.get<double>();
      else if (key == "dropout") base.dropout = v.get<double>();
      else if (key == "support_shots") base.support_shots = v.get<int>();
      else if (key == "full_consumption_prob") base.full_consumption_prob = v.get<double>();
      else if (key == "dessert_prob") base.dessert_prob = v.get<double>();
      else if (key == "container_prob") base.container_prob = v.get<double>();
      else if (key == "density_jitter") base.density_jitter = v.get<double>();
      else if (key == "camera") base.camera = intrinsics_from_json(v, name + ".camera");
      else throw ValidationError(name + ": unknown key '" + key + "'");
    }
  } catch (const io::Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  }
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Meal layout

struct MealPlan {
  SceneSpec spec;
  std::map<int, double> fractions;
};

namespace detail {

struct Slot {
  PlateType type;
  Eigen::Vector2d center;
  Hyper hyper;
};

// Tray-plane layout (mm): the main plate on the left, bowls and the
// container on the right.
inline const std::vector<Slot>& layout() {
  static const std::vector<Slot> kSlots = {
      {PlateType::kMainPlate, {-105.0, 0.0}, Hyper::kMainCourse},
      {PlateType::kSaladBowl, {35.0, -80.0}, Hyper::kSalad},
      {PlateType::kSoupBowl, {145.0, -75.0}, Hyper::kSoup},
      {PlateType::kDessertBowl, {35.0, 85.0}, Hyper::kDessert},
      {PlateType::kPackagedContainer, {140.0, 95.0}, Hyper::kSauce},
  };
  return kSlots;
}

inline bool plates_in_view(const SceneSpec& spec, double margin_px) {
  const TrayFrame frame(spec.pose);
  const auto& k = spec.camera;
  for (const auto& p : spec.plates) {
    double top = p.model.rim_height_mm;
    for (const auto& f : p.foods) top = std::max(top, p.model.rim_height_mm + f.height);
    for (int i = 0; i < 72; ++i) {
      const double a = i * std::numbers::pi / 36.0;
      const Eigen::Vector2d xy = p.center + p.model.rim_radius_mm * Eigen::Vector2d(std::cos(a), std::sin(a));
      for (double h : {0.0, top}) {
        const Point3 c = frame.to_camera(xy.x(), xy.y(), h);
        if (c.z() <= 0.0) return false;
        const Eigen::Vector2d px = geometry::project_point(c, k);
        if (px.x() < margin_px || px.y() < margin_px || px.x() > k.width - 1 - margin_px ||
            px.y() > k.height - 1 - margin_px) {
          return false;
        }
      }
    }
  }
  return true;
}

template <class Rng>
FoodBlob make_blob(const CategoryProfile& cat, Shape shape, double max_radius, bool bowl, double density_jitter,
                   Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  FoodBlob f;
  f.category = cat.recipe.category_id;
  f.hyper = cat.recipe.hyper;
  f.shape = shape;
  f.rotation = in(0.0, std::numbers::pi);
  switch (shape) {
    case Shape::kBox: {
      // half-diagonal stays within max_radius
      const double side = max_radius * std::sqrt(2.0);
      f.size_x = side * in(0.75, 0.97);
      f.size_y = side * in(0.75, 0.97);
      f.height = in(18.0, 35.0);
      break;
    }
    case Shape::kCap:
      f.size_x = max_radius * in(0.8, 1.0);
      f.height = f.size_x * in(0.3, 0.45);
      break;
    case Shape::kBump:
      f.size_x = max_radius * in(0.8, 1.0);
      f.size_y = max_radius * in(0.8, 1.0);
      f.height = std::min(f.size_x, f.size_y) * (bowl ? in(0.4, 0.6) : in(0.3, 0.5));
      break;
  }
  f.density_g_per_ml = cat.recipe.density_g_per_ml * (1.0 + in(-density_jitter, density_jitter));
  f.per_100g = cat.recipe.per_100g;
  f.color = cat.color;
  return f;
}

}  // namespace detail

/// Samples one meal: plate layout with jitter, long-tail categories per hyper,
/// a tray pose that keeps every plate in view and the consumption fractions.
inline MealPlan plan_meal(const CategoryPool& pool, const DatasetOptions& opts, std::uint64_t seed,
                          const geometry::PlateModelSet& models = geometry::default_plate_models()) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto pick = [&](Hyper h) -> const CategoryProfile* {
    const auto& ids = pool.of(h);
    if (ids.empty()) return nullptr;
    const auto p = zipf_probabilities(ids.size(), opts.zipf_exponent);
    std::discrete_distribution<std::size_t> d(p.begin(), p.end());
    return &pool.at(ids[d(rng)]);
  };

  MealPlan plan;
  SceneSpec& spec = plan.spec;
  spec.camera = opts.camera;
  spec.noise_sigma_mm = opts.noise_sigma_mm;
  spec.dropout = opts.dropout;
  int instance = 1;
  const CategoryProfile* salad = nullptr;
  for (const auto& slot : detail::layout()) {
    if (slot.type == PlateType::kDessertBowl && u(rng) >= opts.dessert_prob) continue;
    if (slot.type == PlateType::kPackagedContainer && u(rng) >= opts.container_prob) continue;
    PlatePlacement p;
    p.type = slot.type;
    p.center = slot.center + Eigen::Vector2d(in(-5.0, 5.0), in(-5.0, 5.0));
    p.model = models.at(slot.type);
    const double R = p.model.rim_radius_mm;
    if (slot.type == PlateType::kMainPlate) {
      const double start = in(0.0, 2.0 * std::numbers::pi);
      const Hyper hypers[3] = {Hyper::kMainCourse, Hyper::kSideDish, Hyper::kVegetable};
      const double ring = 0.5 * R, radius = std::min(0.39 * R, 35.0);
      for (int i = 0; i < 3; ++i) {
        const CategoryProfile* cat = pick(hypers[i]);
        if (!cat) continue;
        const double a = start + i * 2.0 * std::numbers::pi / 3.0;
        FoodBlob f = detail::make_blob(*cat, cat->shape, radius, false, opts.density_jitter, rng);
        f.center = p.center + ring * Eigen::Vector2d(std::cos(a), std::sin(a));
        f.instance = instance++;
        p.foods.push_back(f);
      }
    } else if (slot.type == PlateType::kPackagedContainer) {
      const CategoryProfile* cat = pick(Hyper::kSauce);
      if (!cat || !salad) continue;
      SealedContents s;
      s.instance = instance++;
      s.category = cat->recipe.category_id;
      s.hyper = Hyper::kSauce;
      s.portion_g = cat->recipe.portion_g.value_or(30.0);
      s.density_g_per_ml = cat->recipe.density_g_per_ml;
      s.per_100g = cat->recipe.per_100g;
      s.color = cat->color;
      p.sealed = s;
    } else {
      const CategoryProfile* cat = pick(slot.hyper);
      if (!cat) continue;
      if (slot.hyper == Hyper::kSalad) salad = cat;
      // bowls: a single item near the centre; boxes need a flat plate
      const Shape shape = cat->shape == Shape::kBox ? Shape::kBump : cat->shape;
      FoodBlob f = detail::make_blob(*cat, shape, 0.7 * R - 2.0, true, opts.density_jitter, rng);
      f.center = p.center + Eigen::Vector2d(in(-1.5, 1.5), in(-1.5, 1.5));
      f.instance = instance++;
      p.foods.push_back(f);
    }
    spec.plates.push_back(std::move(p));
  }
  spec.validate();

  for (int attempt = 0;; ++attempt) {
    if (attempt == 200) throw ValidationError("plan_meal: no tray pose keeps every plate in view");
    spec.pose = TrayPose{in(350.0, 500.0), in(3.0, 10.0), in(0.0, 360.0)};
    if (detail::plates_in_view(spec, 2.0)) break;
  }

  std::optional<double> salad_fraction;
  for (const auto& p : spec.plates) {
    for (const auto& f : p.foods) {
      const double frac = u(rng) < opts.full_consumption_prob ? 1.0 : in(0.1, 0.9);
      plan.fractions[f.instance] = frac;
      if (f.hyper == Hyper::kSalad) salad_fraction = frac;
    }
  }
  std::normal_distribution<double> n(0.0, 0.05);
  for (const auto& p : spec.plates) {
    if (p.sealed) plan.fractions[p.sealed->instance] = std::clamp(salad_fraction.value_or(0.5) + n(rng), 0.0, 1.0);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Segmentation and support simulation

/// Predicted food labels: each item grows (only into empty plate pixels) or
/// shrinks by `jitter` pixels, drawn from {-1, 0, +1, +2}.
inline LabelMap simulate_prediction(const RenderedScene& scene, std::uint64_t seed) {
  const int w = scene.food.width(), h = scene.food.height();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(-1, 2);
  std::map<int, int> amount;
  for (const auto v : scene.instances.data())
    if (v) amount[v] = 0;
  for (auto& [id, j] : amount) j = jitter(rng);

  LabelMap out(w, h, 0);
  Raster<std::uint16_t> owner(w, h, 0);
  auto inside = [&](int u, int v, int id) { return scene.instances.contains(u, v) && scene.instances(u, v) == id; };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int id = scene.instances(u, v);
      if (!id) continue;
      bool keep = true;
      if (amount[id] < 0) {
        for (int dv = -1; dv <= 1 && keep; ++dv)
          for (int du = -1; du <= 1 && keep; ++du) keep = inside(u + du, v + dv, id);
      }
      if (keep) {
        out(u, v) = scene.food(u, v);
        owner(u, v) = static_cast<std::uint16_t>(id);
      }
    }
  }
  // One pixel ring per pass; the first neighbour in scan order claims a pixel.
  for (int ring = 1; ring <= 2; ++ring) {
    LabelMap grown = out;
    Raster<std::uint16_t> grown_owner = owner;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (out(u, v) || scene.food(u, v) || !scene.plate(u, v)) continue;
        bool claimed = false;
        for (int dv = -1; dv <= 1 && !claimed; ++dv) {
          for (int du = -1; du <= 1 && !claimed; ++du) {
            const int nu = u + du, nv = v + dv;
            if (!owner.contains(nu, nv)) continue;
            const int id = owner(nu, nv);
            if (!id || amount[id] < ring) continue;
            grown(u, v) = out(nu, nv);
            grown_owner(u, v) = static_cast<std::uint16_t>(id);
            claimed = true;
          }
        }
      }
    }
    out = std::move(grown);
    owner = std::move(grown_owner);
  }
  return out;
}

/// L1-normalised colour histogram of `pixels` draws from a signature.
inline Eigen::VectorXd sample_histogram(const ColorSignature& sig, int pixels, std::mt19937_64& rng) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(protonet::kHistogramDim);
  for (int i = 0; i < pixels; ++i) {
    const Rgb c = sig.sample(rng);
    h((protonet::histogram_bin(c.r) * 3 + protonet::histogram_bin(c.g)) * 3 + protonet::histogram_bin(c.b)) += 1.0;
  }
  return h / static_cast<double>(pixels);
}

/// Annotated few-shot samples: `shots` histograms per category, ids
/// category * 100 + shot.
inline protonet::Dataset make_support_set(const CategoryPool& pool, int shots, std::uint64_t seed) {
  if (shots <= 0 || shots >= 100) throw ValidationError("support shots must be in [1, 99]");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(300, 1500);
  protonet::Dataset out;
  for (const auto& c : pool.categories()) {
    for (int k = 0; k < shots; ++k) {
      const int n = size(rng);
      out.push_back({c.recipe.category_id * 100 + k, c.recipe.category_id, sample_histogram(c.color, n, rng)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth files

inline io::Json pair_truth_to_json(const PairTruth& t) {
  io::Json items = io::Json::array();
  for (const auto& c : t.items) {
    io::Json n = io::Json::object();
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) n[std::string(NutrientVector::kNames[i])] = c.nutrients[i];
    items.push_back({{"instance", c.instance},
                     {"category", c.category},
                     {"hyper", hyper_name(c.hyper)},
                     {"plate_type", static_cast<int>(c.plate)},
                     {"shape", c.shape ? std::string(shape_name(*c.shape)) : std::string("sealed")},
                     {"before_ml", c.before_ml},
                     {"after_ml", c.after_ml},
                     {"consumed_ml", c.consumed_ml},
                     {"before_g", c.before_g},
                     {"consumed_g", c.consumed_g},
                     {"consumed_fraction", c.consumed_fraction},
                     {"nutrients", n}});
  }
  io::Json total = io::Json::object();
  for (std::size_t i = 0; i < NutrientVector::kCount; ++i) total[std::string(NutrientVector::kNames[i])] = t.total[i];
  return io::Json{{"items", items}, {"total", total}};
}

inline PairTruth pair_truth_from_json(const io::Json& j, const std::string& name = "ground truth") {
  auto nutrients = [](const io::Json& o) {
    NutrientVector n;
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) n[i] = o.at(std::string(NutrientVector::kNames[i])).get<double>();
    return n;
  };
  PairTruth t;
  try {
    for (const auto& it : j.at("items")) {
      ItemConsumption c;
      c.instance = it.at("instance").get<int>();
      c.category = it.at("category").get<int>();
      c.hyper = parse_hyper(it.at("hyper").get<std::string>());
      c.plate = plate_from_index(it.at("plate_type").get<int>());
      const std::string shape = it.at("shape").get<std::string>();
      if (shape == "box") c.shape = Shape::kBox;
      else if (shape == "cap") c.shape = Shape::kCap;
      else if (shape == "bump") c.shape = Shape::kBump;
      c.before_ml = it.at("before_ml").get<double>();
      c.after_ml = it.at("after_ml").get<double>();
      c.consumed_ml = it.at("consumed_ml").get<double>();
      c.before_g = it.at("before_g").get<double>();
      c.consumed_g = it.at("consumed_g").get<double>();
      c.consumed_fraction = it.at("consumed_fraction").get<double>();
      c.nutrients = nutrients(it.at("nutrients"));
      t.items.push_back(c);
    }
    t.total = nutrients(j.at("total"));
  } catch (const io::Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Manifest

struct StageFiles {
  std::string depth, food, food_pred, plate, instances, rgb;
};

struct MealEntry {
  std::string id;
  int day = 0;
  std::string split;
  std::string menu;
  StageFiles before, after;
  std::string truth;

  const StageFiles& stage(CaptureStage s) const { return s == CaptureStage::kAfter ? after : before; }
};

struct DatasetManifest {
  std::filesystem::path root;
  DatasetOptions options;
  std::string intrinsics = "intrinsics.json";
  std::string recipes = "recipes.csv";
  std::string plate_models = "plate_models.json";
  std::string support = "support.csv";
  std::vector<MealEntry> meals;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }

  const MealEntry& meal(const std::string& id) const {
    for (const auto& m : meals)
      if (m.id == id) return m;
    throw ValidationError("manifest has no meal '" + id + "'");
  }
};

inline io::Json manifest_to_json(const DatasetManifest& m) {
  auto stage = [](const StageFiles& s) {
    return io::Json{{"depth", s.depth}, {"food", s.food}, {"food_pred", s.food_pred},
                    {"plate", s.plate}, {"instances", s.instances}, {"rgb", s.rgb}};
  };
  io::Json meals = io::Json::array();
  for (const auto& e : m.meals) {
    meals.push_back({{"id", e.id}, {"day", e.day}, {"split", e.split}, {"menu", e.menu},
                     {"before", stage(e.before)}, {"after", stage(e.after)}, {"truth", e.truth}});
  }
  return io::Json{{"version", kDatasetVersion},
                  {"generator", dataset_options_to_json(m.options)},
                  {"intrinsics", m.intrinsics},
                  {"recipes", m.recipes},
                  {"plate_models", m.plate_models},
                  {"support", m.support},
                  {"meals", meals}};
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  const io::Json j = io::read_json(path);
  DatasetManifest m;
  m.root = path.parent_path();
  const std::string name = path.string();
  try {
    if (j.at("version").get<std::string>() != kDatasetVersion) {
      throw ValidationError(name + ": unsupported dataset version " + j.at("version").get<std::string>());
    }
    m.options = dataset_options_from_json(j.at("generator"), {}, name + ".generator");
    m.intrinsics = j.at("intrinsics").get<std::string>();
    m.recipes = j.at("recipes").get<std::string>();
    m.plate_models = j.at("plate_models").get<std::string>();
    m.support = j.at("support").get<std::string>();
    auto stage = [](const io::Json& s) {
      return StageFiles{s.at("depth").get<std::string>(),     s.at("food").get<std::string>(),
                        s.at("food_pred").get<std::string>(), s.at("plate").get<std::string>(),
                        s.at("instances").get<std::string>(), s.at("rgb").get<std::string>()};
    };
    std::set<std::string> ids;
    for (const auto& e : j.at("meals")) {
      MealEntry me;
      me.id = e.at("id").get<std::string>();
      if (!ids.insert(me.id).second) throw ValidationError(name + ": duplicate meal id " + me.id);
      me.day = e.at("day").get<int>();
      me.split = e.at("split").get<std::string>();
      me.menu = e.at("menu").get<std::string>();
      me.before = stage(e.at("before"));
      me.after = stage(e.at("after"));
      me.truth = e.at("truth").get<std::string>();
      m.meals.push_back(std::move(me));
    }
  } catch (const io::Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return m;
}

/// Loads one capture of a meal. `predicted` selects the simulated
/// segmentation instead of the true food labels.
inline MealRecord load_stage(const DatasetManifest& m, const MealEntry& meal, CaptureStage stage, bool predicted,
                             int min_item_area = kDefaultMinItemArea) {
  const StageFiles& f = meal.stage(stage);
  SceneLoadOptions opts;
  opts.stage = stage;
  opts.min_item_area = min_item_area;
  MealRecord rec = load_scene(m.resolve(f.depth), m.resolve(predicted ? f.food_pred : f.food), m.resolve(f.plate),
                              m.resolve(m.intrinsics), opts);
  rec.instances = io::read_instances(m.resolve(f.instances));
  rec.color = io::read_color(m.resolve(f.rgb));
  if (!rec.instances->same_shape(rec.depth) || !rec.color->same_shape(rec.depth)) {
    throw ValidationError(meal.id + ": instance or colour raster does not match the depth raster");
  }
  return rec;
}

inline PairTruth load_truth(const DatasetManifest& m, const MealEntry& meal) {
  const auto path = m.resolve(meal.truth);
  return pair_truth_from_json(io::read_json(path).at("consumed"), path.string());
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline std::string meal_id(int i) {
  std::ostringstream s;
  s << "meal_" << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

inline std::string day_name(int d) {
  std::ostringstream s;
  s << "day_" << std::setw(3) << std::setfill('0') << d;
  return s.str();
}

inline void write_stage(const std::filesystem::path& dir, const std::string& prefix, const RenderedScene& scene,
                        const LabelMap& predicted, StageFiles& files, const std::string& rel) {
  files = {rel + "/" + prefix + "_depth.png",     rel + "/" + prefix + "_food.png",
           rel + "/" + prefix + "_food_pred.png", rel + "/" + prefix + "_plate.png",
           rel + "/" + prefix + "_instances.png", rel + "/" + prefix + "_rgb.png"};
  io::write_depth(dir / (prefix + "_depth.png"), scene.depth);
  io::write_labels(dir / (prefix + "_food.png"), scene.food);
  io::write_labels(dir / (prefix + "_food_pred.png"), predicted);
  io::write_labels(dir / (prefix + "_plate.png"), scene.plate);
  io::write_instances(dir / (prefix + "_instances.png"), scene.instances);
  io::write_color(dir / (prefix + "_rgb.png"), scene.color);
}

}  // namespace detail

/// Writes a complete dataset under `out_dir` and returns its manifest. The
/// output depends only on the options (worker count excluded).
inline DatasetManifest generate_dataset(const DatasetOptions& opts, const CategoryPool& pool,
                                        const std::filesystem::path& out_dir) {
  opts.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "meals");
  fs::create_directories(out_dir / "menus");
  const auto models = geometry::default_plate_models();

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.options = opts;
  io::write_json(out_dir / manifest.intrinsics, intrinsics_to_json(opts.camera));
  io::write_text_atomic(out_dir / manifest.recipes, format_recipes(pool.recipes()));
  io::write_json(out_dir / manifest.plate_models, geometry::plate_models_to_json(models));
  protonet::save_samples(out_dir / manifest.support, make_support_set(pool, opts.support_shots, derive_seed(opts.seed, 1)));

  std::vector<MealPlan> plans;
  for (int i = 0; i < opts.meals; ++i) plans.push_back(plan_meal(pool, opts, derive_seed(opts.seed, 1000 + i), models));

  const int test_count = static_cast<int>(std::lround(opts.test_fraction * opts.meals));
  const int days = (opts.meals + opts.meals_per_day - 1) / opts.meals_per_day;
  std::mt19937_64 menu_rng(derive_seed(opts.seed, 2));
  for (int d = 0; d < days; ++d) {
    DailyMenu menu;
    menu.date = detail::day_name(d);
    for (int i = d * opts.meals_per_day; i < std::min(opts.meals, (d + 1) * opts.meals_per_day); ++i) {
      for (const auto& p : plans[i].spec.plates) {
        for (const auto& f : p.foods) menu.candidates[f.hyper].push_back(f.category);
        if (p.sealed) menu.candidates[p.sealed->hyper].push_back(p.sealed->category);
      }
    }
    for (Hyper h : kAllHypers) {
      if (pool.of(h).empty()) continue;
      auto& ids = menu.candidates[h];
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      std::vector<int> others;
      for (int id : pool.of(h))
        if (!std::binary_search(ids.begin(), ids.end(), id)) others.push_back(id);
      std::shuffle(others.begin(), others.end(), menu_rng);
      for (std::size_t k = 0; static_cast<int>(ids.size()) < opts.menu_size && k < others.size(); ++k) {
        ids.push_back(others[k]);
      }
      std::sort(ids.begin(), ids.end());
    }
    io::write_json(out_dir / "menus" / (menu.date + ".json"), menu_to_json(menu));
  }

  manifest.meals.resize(opts.meals);
  parallel_for(static_cast<std::size_t>(opts.meals), opts.workers, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    MealEntry& e = manifest.meals[i];
    e.id = detail::meal_id(idx);
    e.day = idx / opts.meals_per_day;
    e.split = idx >= opts.meals - test_count ? "test" : "train";
    e.menu = "menus/" + detail::day_name(e.day) + ".json";
    const std::string rel = "meals/" + e.id;
    const fs::path dir = out_dir / rel;
    fs::create_directories(dir);
    const std::uint64_t seed = derive_seed(opts.seed, 100000 + i);
    const MealPair pair = generate_meal_pair(plans[i].spec, plans[i].fractions, seed);
    detail::write_stage(dir, "before", pair.before, simulate_prediction(pair.before, derive_seed(seed, 1)), e.before, rel);
    detail::write_stage(dir, "after", pair.after, simulate_prediction(pair.after, derive_seed(seed, 2)), e.after, rel);
    const TrayPose& pose = pair.before_spec.pose;
    io::Json truth{{"meal_id", e.id},
                   {"day", e.day},
                   {"split", e.split},
                   {"pose", {{"distance_mm", pose.distance_mm}, {"tilt_deg", pose.tilt_deg}, {"azimuth_deg", pose.azimuth_deg}}},
                   {"consumed", pair_truth_to_json(pair.consumed)}};
    e.truth = rel + "/truth.json";
    io::write_json(out_dir / e.truth, truth);
  });
  io::write_json(out_dir / "manifest.json", manifest_to_json(manifest));
  return manifest;
}

inline DatasetManifest generate_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir) {
  opts.validate();
  return generate_dataset(opts, make_category_pool(opts.categories, derive_seed(opts.seed, 0)), out_dir);
}

}  // namespace trayscan::synthscene
