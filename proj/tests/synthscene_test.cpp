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

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>
#include <fstream>
#include <random>

#include "trayscan/pipeline.hpp"
#include "trayscan/protonet/io.hpp"
#include "trayscan/synthscene/dataset.hpp"

using namespace trayscan;
using namespace trayscan::synthscene;
namespace fs = std::filesystem;

namespace {

FoodBlob blob(Shape shape, double sx, double sy, double h, Eigen::Vector2d c = {0, 0}, int instance = 1) {
  FoodBlob f;
  f.instance = instance;
  f.shape = shape;
  f.size_x = sx;
  f.size_y = sy;
  f.height = h;
  f.center = c;
  return f;
}

// Midpoint-rule integral of the height field over the bounding square, ml.
double integrate_height(const FoodBlob& f, int n = 1200) {
  const double r = f.footprint_radius();
  const double step = 2.0 * r / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sum += f.height_at(f.center + Eigen::Vector2d(-r + (i + 0.5) * step, -r + (j + 0.5) * step));
  return sum * step * step / 1000.0;
}

SceneSpec single_plate(FoodBlob f, PlateType type = PlateType::kMainPlate) {
  SceneSpec s;
  PlatePlacement p;
  p.type = type;
  p.model = geometry::default_plate_models().at(type);
  p.foods.push_back(f);
  s.plates.push_back(p);
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trayscan_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(Primitives, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(blob(Shape::kBox, 100, 100, 20).volume_ml(), 200.0);
  EXPECT_NEAR(blob(Shape::kCap, 50, 0, 50).volume_ml(), 261.799, 1e-3);
  EXPECT_NEAR(blob(Shape::kBump, 30, 20, 15).volume_ml(), std::numbers::pi * 30 * 20 * 15 / 3000.0, 1e-12);
}

TEST(Primitives, ClosedFormMatchesQuadrature) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 9; ++t) {
    FoodBlob f;
    switch (t % 3) {
      case 0: f = blob(Shape::kBox, 20 + 30 * u(rng), 20 + 30 * u(rng), 10 + 20 * u(rng)); break;
      case 1: f = blob(Shape::kCap, 20 + 20 * u(rng), 0, 5 + 15 * u(rng)); break;
      default: f = blob(Shape::kBump, 20 + 15 * u(rng), 20 + 15 * u(rng), 5 + 10 * u(rng)); break;
    }
    f.rotation = u(rng) * 3.0;
    EXPECT_NEAR(integrate_height(f), f.volume_ml(), 2e-3 * f.volume_ml()) << shape_name(f.shape);
  }
}

TEST(Primitives, SlopeBoundHoldsOnSamples) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Shape s : {Shape::kCap, Shape::kBump}) {
    const FoodBlob f = blob(s, 30, 22, 12);
    const double L = f.max_slope();
    for (int i = 0; i < 20000; ++i) {
      const Eigen::Vector2d a(35 * u(rng), 35 * u(rng)), b = a + Eigen::Vector2d(0.05 * u(rng), 0.05 * u(rng));
      if ((a - b).norm() == 0) continue;
      EXPECT_LE(std::abs(f.height_at(a) - f.height_at(b)), L * (a - b).norm() * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST(Spec, RejectsInvalidGeometry) {
  auto models = geometry::default_plate_models();
  SceneSpec s = single_plate(blob(Shape::kBox, 40, 40, 20));
  EXPECT_NO_THROW(s.validate());

  SceneSpec outside = single_plate(blob(Shape::kCap, 30, 0, 10, {70, 0}));
  EXPECT_THROW(outside.validate(), ValidationError);

  SceneSpec overlap = s;
  PlatePlacement other;
  other.type = PlateType::kSaladBowl;
  other.model = models.at(PlateType::kSaladBowl);
  other.center = {100, 0};
  overlap.plates.push_back(other);
  EXPECT_THROW(overlap.validate(), ValidationError);

  EXPECT_THROW(single_plate(blob(Shape::kBox, 20, 20, 10), PlateType::kSaladBowl).validate(), ValidationError);

  SceneSpec twins = s;
  twins.plates[0].foods.push_back(blob(Shape::kCap, 10, 0, 5, {60, 0}, 1));
  EXPECT_THROW(twins.validate(), ValidationError);

  SceneSpec bad_noise = s;
  bad_noise.dropout = 1.0;
  EXPECT_THROW(bad_noise.validate(), ValidationError);
}

TEST(Render, LabelsAndDepthOfASingleBox) {
  SceneSpec s = single_plate(blob(Shape::kBox, 40, 40, 20));
  s.pose = {400, 0, 0};
  const IdealRender r = render_ideal(s);
  const auto& k = s.camera;
  // the camera looks straight down the tray normal at the box top
  const int cu = static_cast<int>(k.cx), cv = static_cast<int>(k.cy);
  EXPECT_NEAR(r.depth(cu, cv), 400 - 12 - 20, 1e-6);
  EXPECT_EQ(r.food(cu, cv), static_cast<int>(Hyper::kMainCourse));
  EXPECT_EQ(r.plate(cu, cv), static_cast<int>(PlateType::kMainPlate));
  EXPECT_EQ(r.instances(cu, cv), 1);
  EXPECT_NEAR(r.depth(0, 0), 400, 1e-6);
  EXPECT_EQ(r.plate(0, 0), 0);
  // plate top between the box and the rim
  const int pu = cu + static_cast<int>(60 * k.fx / 388.0);
  EXPECT_NEAR(r.depth(pu, cv), 388, 1e-6);
  EXPECT_EQ(r.food(pu, cv), 0);
  EXPECT_EQ(r.plate(pu, cv), static_cast<int>(PlateType::kMainPlate));
}

TEST(Render, NoiselessPipelineWithinTwoPercentOnEveryPrimitive) {
  DatasetOptions o;
  o.noise_sigma_mm = 0;
  o.dropout = 0;
  o.container_prob = 0;
  o.dessert_prob = 1;
  const CategoryPool pool = make_category_pool(42, 5);
  std::set<Shape> seen;
  for (int m = 0; m < 4; ++m) {
    const MealPlan plan = plan_meal(pool, o, 100 + m);
    const RenderedScene r = generate(plan.spec, m);
    MealRecord rec = make_record(r.depth, r.food, r.plate, plan.spec.camera);
    rec.instances = r.instances;
    const auto a = pipeline::analyze_scene(rec);
    ASSERT_EQ(a.record.items.size(), r.truth.items.size());
    for (const auto& it : a.record.items) {
      const ItemTruth* t = r.truth.find(*it.gt_instance);
      ASSERT_TRUE(t);
      seen.insert(*t->shape);
      EXPECT_LT(std::abs(it.volume_ml - t->volume_ml), 0.02 * t->volume_ml)
          << "meal " << m << " " << shape_name(*t->shape) << " on plate " << static_cast<int>(t->plate);
    }
  }
  EXPECT_EQ(seen.size(), 3u);
}

TEST(Render, DeterministicPerSeed) {
  DatasetOptions o;
  const CategoryPool pool = make_category_pool(14, 3);
  const MealPlan plan = plan_meal(pool, o, 9);
  const RenderedScene a = generate(plan.spec, 4), b = generate(plan.spec, 4), c = generate(plan.spec, 5);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.color, b.color);
  EXPECT_EQ(a.food, b.food);
  EXPECT_NE(a.depth, c.depth);
  EXPECT_EQ(a.food, c.food);
}

TEST(Render, NoiseModelStatistics) {
  Raster<double> ideal(400, 300, 400.0);
  ideal(0, 0) = 0.0;
  const DepthImage clean = apply_depth_noise(ideal, 0.0, 0.0, 1);
  EXPECT_EQ(clean(1, 1), 400);
  EXPECT_EQ(clean(0, 0), 0);

  const DepthImage noisy = apply_depth_noise(ideal, 1.5, 0.02, 2);
  std::size_t dropped = 0, n = 0;
  double s1 = 0, s2 = 0;
  for (std::size_t i = 1; i < noisy.size(); ++i) {
    if (!noisy.data()[i]) {
      ++dropped;
      continue;
    }
    const double e = noisy.data()[i] - 400.0;
    s1 += e, s2 += e * e, ++n;
  }
  const double N = static_cast<double>(noisy.size() - 1);
  EXPECT_NEAR(dropped / N, 0.02, 4 * std::sqrt(0.02 * 0.98 / N));
  const double mean = s1 / n, var = s2 / n - mean * mean;
  // rounding to whole millimetres adds 1/12 mm^2 of variance
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.5 * 1.5 + 1.0 / 12.0, 0.05);
}

TEST(MealPair, FractionExamples) {
  SceneSpec s = single_plate(blob(Shape::kBox, 40, 30, 20));
  s.plates[0].foods.push_back(blob(Shape::kCap, 25, 0, 10, {55, 0}, 2));
  s.plates[0].foods.push_back(blob(Shape::kBump, 20, 15, 10, {-50, -10}, 3));

  const MealPair zero = generate_meal_pair(s, {{1, 0.0}, {2, 0.0}, {3, 0.0}}, 1);
  EXPECT_EQ(zero.before.depth, zero.after.depth);
  for (const auto& c : zero.consumed.items) EXPECT_EQ(c.consumed_ml, 0.0);

  const MealPair full = generate_meal_pair(s, {{1, 1.0}}, 1);
  EXPECT_EQ(full.after.truth.find(1), nullptr);
  EXPECT_EQ(full.consumed.items[0].consumed_ml, full.consumed.items[0].before_ml);
  for (const auto v : full.after.instances.data()) EXPECT_NE(v, 1);

  const MealPair half = generate_meal_pair(s, {{1, 0.5}, {2, 0.5}, {3, 0.25}}, 1);
  EXPECT_DOUBLE_EQ(half.consumed.items[0].consumed_ml, 0.5 * half.consumed.items[0].before_ml);
  EXPECT_NEAR(half.consumed.items[1].after_ml, 0.5 * half.consumed.items[1].before_ml, 1e-9);
  EXPECT_NEAR(half.consumed.items[2].after_ml, 0.75 * half.consumed.items[2].before_ml, 1e-12);

  EXPECT_THROW(consume(s, {{1, 1.5}}), ValidationError);
  EXPECT_THROW(consume(s, {{1, -0.1}}), ValidationError);
}

TEST(MealPair, ConsumedEqualsBeforeMinusAfter) {
  DatasetOptions o;
  const CategoryPool pool = make_category_pool(30, 8);
  for (int m = 0; m < 20; ++m) {
    const MealPlan plan = plan_meal(pool, o, m);
    const GroundTruth before = scene_truth(plan.spec);
    const GroundTruth after = scene_truth(consume(plan.spec, plan.fractions));
    const PairTruth t = pair_truth(before, after);
    NutrientVector total;
    for (const auto& c : t.items) {
      const ItemTruth* b = before.find(c.instance);
      const ItemTruth* a = after.find(c.instance);
      EXPECT_EQ(c.consumed_ml, b->volume_ml - (a ? a->volume_ml : 0.0));
      EXPECT_EQ(c.consumed_g, b->weight_g - (a ? a->weight_g : 0.0));
      total += c.nutrients;
      if (c.shape) {
        EXPECT_NEAR(c.consumed_ml, plan.fractions.at(c.instance) * c.before_ml, 1e-9 * c.before_ml);
      }
    }
    EXPECT_EQ(total, t.total);
  }
}

TEST(MealPair, SealedContainerFollowsSaladFraction) {
  DatasetOptions o;
  o.container_prob = 1.0;
  const CategoryPool pool = make_category_pool(21, 2);
  for (int m = 0; m < 30; ++m) {
    const MealPlan plan = plan_meal(pool, o, m);
    std::optional<double> salad, sauce;
    for (const auto& p : plan.spec.plates) {
      for (const auto& f : p.foods)
        if (f.hyper == Hyper::kSalad) salad = plan.fractions.at(f.instance);
      if (p.sealed) sauce = plan.fractions.at(p.sealed->instance);
      for (const auto& f : p.foods) EXPECT_NE(f.hyper, Hyper::kSauce);
    }
    ASSERT_TRUE(salad && sauce);
    EXPECT_LT(std::abs(*salad - *sauce), 0.3);
  }
}

TEST(Layout, PlansAreValidAndInView) {
  DatasetOptions o;
  const CategoryPool pool = make_category_pool(76, 1);
  for (int m = 0; m < 100; ++m) {
    const MealPlan plan = plan_meal(pool, o, m);
    EXPECT_NO_THROW(plan.spec.validate());
    EXPECT_GE(plan.spec.pose.distance_mm, 350);
    EXPECT_LE(plan.spec.pose.distance_mm, 500);
    for (const auto& [id, f] : plan.fractions) {
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
  }
}

TEST(Layout, CategoryFrequenciesFollowTheLongTailTarget) {
  DatasetOptions o;
  const CategoryPool pool = make_category_pool(76, 4);
  std::map<int, int> counts;
  const int meals = 3000;
  for (int m = 0; m < meals; ++m) {
    for (const auto& p : plan_meal(pool, o, m).spec.plates)
      for (const auto& f : p.foods) ++counts[f.category];
  }
  for (Hyper h : {Hyper::kMainCourse, Hyper::kSideDish, Hyper::kVegetable, Hyper::kSalad, Hyper::kSoup}) {
    const auto& ids = pool.of(h);
    const auto p = zipf_probabilities(ids.size(), o.zipf_exponent);
    int n = 0;
    for (int id : ids) n += counts[id];
    ASSERT_EQ(n, meals);
    double chi2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double expected = n * p[k];
      chi2 += (counts[ids[k]] - expected) * (counts[ids[k]] - expected) / expected;
    }
    const boost::math::chi_squared dist(static_cast<double>(ids.size() - 1));
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.999)) << hyper_name(h);
  }
}

TEST(Segmentation, PredictionOnlyPerturbsItemBorders) {
  DatasetOptions o;
  const CategoryPool pool = make_category_pool(30, 6);
  const MealPlan plan = plan_meal(pool, o, 17);
  const RenderedScene r = generate(plan.spec, 2);
  const LabelMap pred = simulate_prediction(r, 3);
  int changed = 0;
  for (int v = 0; v < pred.height(); ++v) {
    for (int u = 0; u < pred.width(); ++u) {
      if (pred(u, v) == r.food(u, v)) continue;
      ++changed;
      EXPECT_NE(r.plate(u, v), 0);
      auto any_within = [&](int radius, auto pred_fn) {
        for (int dv = -radius; dv <= radius; ++dv)
          for (int du = -radius; du <= radius; ++du)
            if (r.food.contains(u + du, v + dv) && pred_fn(u + du, v + dv)) return true;
        return false;
      };
      if (pred(u, v) == 0) {
        // eroded: the pixel sat on its item's border
        const int id = r.instances(u, v);
        EXPECT_TRUE(any_within(1, [&](int nu, int nv) { return r.instances(nu, nv) != id; }));
      } else {
        // grown into empty plate, never relabelling another item
        EXPECT_EQ(r.food(u, v), 0);
        const int label = pred(u, v);
        EXPECT_TRUE(any_within(2, [&](int nu, int nv) { return r.food(nu, nv) == label; }));
      }
    }
  }
  EXPECT_GT(changed, 0);
  EXPECT_EQ(pred, simulate_prediction(r, 3));
}

TEST(Support, EveryCategoryHasNormalisedShots) {
  const CategoryPool pool = make_category_pool(20, 9);
  const auto support = make_support_set(pool, 3, 1);
  EXPECT_EQ(support.size(), 60u);
  std::map<int, int> per;
  for (const auto& s : support) {
    ++per[s.category];
    EXPECT_NEAR(s.features.sum(), 1.0, 1e-12);
    EXPECT_EQ(s.features.size(), protonet::kHistogramDim);
  }
  for (const auto& c : pool.categories()) EXPECT_EQ(per[c.recipe.category_id], 3);
  EXPECT_THROW(make_support_set(pool, 0, 1), ValidationError);
}

TEST(Pool, DistinctColoursAndValidRecipes) {
  const CategoryPool pool = make_category_pool(76, 2);
  std::set<std::pair<int, int>> colours;
  for (const auto& c : pool.categories()) {
    EXPECT_NO_THROW(c.recipe.validate());
    auto key = [](Rgb x) { return x.r * 65536 + x.g * 256 + x.b; };
    EXPECT_TRUE(colours.insert({key(c.color.colors[0]), key(c.color.colors[1])}).second);
    EXPECT_EQ(c.recipe.portion_g.has_value(), c.recipe.hyper == Hyper::kSauce);
  }
  EXPECT_THROW(make_category_pool(0, 1), ValidationError);
  EXPECT_THROW(CategoryPool(std::vector<CategoryProfile>{}), ValidationError);
}

TEST(Dataset, TenMealsRoundTripThroughTheLoaders) {
  const fs::path dir = scratch("ten");
  DatasetOptions o;
  o.meals = 10;
  o.categories = 12;
  o.seed = 3;
  const DatasetManifest m = generate_dataset(o, dir);
  ASSERT_EQ(m.meals.size(), 10u);

  const DatasetManifest loaded = load_manifest(dir / "manifest.json");
  EXPECT_EQ(manifest_to_json(loaded), manifest_to_json(m));
  const RecipeBook recipes = load_recipes(loaded.resolve(loaded.recipes));
  EXPECT_EQ(recipes.size(), 12u);
  EXPECT_NO_THROW(geometry::load_plate_models(loaded.resolve(loaded.plate_models)));
  EXPECT_EQ(protonet::load_samples(loaded.resolve(loaded.support)).size(), 12u * o.support_shots);
  int test = 0;
  for (const auto& meal : loaded.meals) {
    test += meal.split == "test";
    const DailyMenu menu = load_menu(loaded.resolve(meal.menu), recipes.taxonomy());
    for (CaptureStage st : {CaptureStage::kBefore, CaptureStage::kAfter}) {
      for (bool pred : {false, true}) {
        const MealRecord rec = load_stage(loaded, meal, st, pred);
        EXPECT_EQ(rec.depth.width(), o.camera.width);
        EXPECT_FALSE(rec.items.empty() && st == CaptureStage::kBefore);
      }
    }
    const PairTruth truth = load_truth(loaded, meal);
    for (const auto& item : truth.items) {
      const auto& listed = menu.of(item.hyper);
      EXPECT_TRUE(std::find(listed.begin(), listed.end(), item.category) != listed.end());
      EXPECT_TRUE(recipes.find(item.category));
    }
  }
  EXPECT_EQ(test, 8);
  fs::remove_all(dir);
}

TEST(Dataset, FixedSeedGivesByteIdenticalFiles) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  DatasetOptions o;
  o.meals = 3;
  o.categories = 12;
  generate_dataset(o, a);
  o.workers = 3;
  generate_dataset(o, b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 30u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, OptionsJsonRejectsUnknownKeys) {
  EXPECT_THROW(dataset_options_from_json(io::Json::parse(R"({"meal": 3})")), ValidationError);
  EXPECT_THROW(dataset_options_from_json(io::Json::parse(R"({"meals": 0})")), ValidationError);
  const auto o = dataset_options_from_json(io::Json::parse(R"({"meals": 5, "seed": 9})"));
  EXPECT_EQ(o.meals, 5);
  EXPECT_EQ(o.seed, 9u);
  EXPECT_EQ(dataset_options_to_json(dataset_options_from_json(dataset_options_to_json(o))), dataset_options_to_json(o));
}

TEST(Render, RecoveredPlateCentresWithinThreeMillimetres) {
  DatasetOptions o;
  o.dessert_prob = 1;
  o.container_prob = 1;
  const CategoryPool pool = make_category_pool(28, 7);
  const auto models = geometry::default_plate_models();
  for (int m = 0; m < 5; ++m) {
    const MealPlan plan = plan_meal(pool, o, 40 + m);
    const RenderedScene r = generate(plan.spec, m);
    const MealRecord rec = make_record(r.depth, r.food, r.plate, plan.spec.camera);
    const auto tray = pipeline::fit_tray(rec, {});
    const TrayFrame frame(plan.spec.pose);
    const auto comps = connected_components(r.plate, 200);
    ASSERT_EQ(comps.size(), plan.spec.plates.size());
    for (const auto& comp : comps) {
      const auto type = plate_from_index(comp.label);
      const auto it = std::find_if(plan.spec.plates.begin(), plan.spec.plates.end(),
                                   [&](const PlatePlacement& p) { return p.type == type; });
      const auto surface = geometry::place_plate(models.at(type), comp.region, rec.depth, rec.intrinsics, tray.plane);
      const Point3 truth = frame.to_camera(it->center.x(), it->center.y(), 0.0);
      EXPECT_LT((surface.center() - tray.plane.project(truth)).norm(), 3.0) << plate_type_name(type);
    }
  }
}
