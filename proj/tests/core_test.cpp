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

#include <filesystem>
#include <queue>
#include <random>
#include <set>

#include "trayscan/core/items.hpp"
#include "trayscan/core/loaders.hpp"
#include "trayscan/core/raster_io.hpp"

namespace fs = std::filesystem;
using namespace trayscan;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("trayscan_core_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void fill_block(LabelMap& m, int u0, int v0, int w, int h, std::uint8_t label) {
  for (int v = v0; v < v0 + h; ++v)
    for (int u = u0; u < u0 + w; ++u) m(u, v) = label;
}

// Independent flood fill: every (label, component) as a set of pixels.
std::set<std::set<std::pair<int, int>>> oracle_components(const LabelMap& m, int min_area) {
  std::set<std::set<std::pair<int, int>>> out;
  std::vector<char> seen(m.size(), 0);
  for (int v = 0; v < m.height(); ++v) {
    for (int u = 0; u < m.width(); ++u) {
      if (m(u, v) == 0 || seen[v * m.width() + u]) continue;
      std::set<std::pair<int, int>> comp;
      std::queue<std::pair<int, int>> q;
      q.push({u, v});
      seen[v * m.width() + u] = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        comp.insert({x, y});
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
            if (seen[ny * m.width() + nx] || m(nx, ny) != m(u, v)) continue;
            seen[ny * m.width() + nx] = 1;
            q.push({nx, ny});
          }
      }
      if (static_cast<int>(comp.size()) >= min_area) out.insert(comp);
    }
  }
  return out;
}

std::set<std::set<std::pair<int, int>>> as_sets(const std::vector<FoodItem>& items) {
  std::set<std::set<std::pair<int, int>>> out;
  for (const auto& it : items) {
    std::set<std::pair<int, int>> s;
    for (const auto& p : it.region) s.insert({p.u, p.v});
    out.insert(s);
  }
  return out;
}

struct SceneFiles {
  fs::path depth, food, plate, intrinsics;
};

SceneFiles write_scene(const fs::path& dir, const LabelMap& food, CameraIntrinsics k = {}) {
  SceneFiles f{dir / "depth.pgm", dir / "food.pgm", dir / "plate.pgm", dir / "intrinsics.json"};
  io::write_depth(f.depth, DepthImage(k.width, k.height, 400));
  io::write_labels(f.food, food);
  io::write_labels(f.plate, LabelMap(k.width, k.height, 0));
  io::write_json(f.intrinsics, intrinsics_to_json(k));
  return f;
}

}  // namespace

TEST(LoadScene, AllBackgroundHasNoItems) {
  auto dir = temp_dir("empty");
  auto f = write_scene(dir, LabelMap(640, 480, 0));
  auto rec = load_scene(f.depth, f.food, f.plate, f.intrinsics);
  EXPECT_TRUE(rec.items.empty());
}

TEST(LoadScene, SingleSoupBlock) {
  auto dir = temp_dir("soup");
  LabelMap food(640, 480, 0);
  fill_block(food, 100, 100, 100, 100, static_cast<std::uint8_t>(Hyper::kSoup));
  auto f = write_scene(dir, food);
  auto rec = load_scene(f.depth, f.food, f.plate, f.intrinsics);
  ASSERT_EQ(rec.items.size(), 1u);
  EXPECT_EQ(rec.items[0].hyper, Hyper::kSoup);
  EXPECT_EQ(rec.items[0].region.size(), 10000u);
}

TEST(LoadScene, TwoDisjointBlocksMatchFloodFill) {
  auto dir = temp_dir("two");
  LabelMap food(640, 480, 0);
  fill_block(food, 10, 10, 30, 30, 3);
  fill_block(food, 300, 200, 25, 40, 3);
  auto f = write_scene(dir, food);
  auto rec = load_scene(f.depth, f.food, f.plate, f.intrinsics);
  EXPECT_EQ(rec.items.size(), 2u);
  EXPECT_EQ(as_sets(rec.items), oracle_components(food, kDefaultMinItemArea));
}

TEST(LoadScene, DimensionMismatchNamesFile) {
  auto dir = temp_dir("mismatch");
  auto f = write_scene(dir, LabelMap(640, 480, 0));
  io::write_labels(f.plate, LabelMap(320, 240, 0));
  try {
    load_scene(f.depth, f.food, f.plate, f.intrinsics);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("plate.pgm"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("320x240"), std::string::npos);
  }
}

TEST(LoadScene, UnknownLabelReportsValue) {
  auto dir = temp_dir("unknown");
  LabelMap food(640, 480, 0);
  food(5, 7) = 9;
  auto f = write_scene(dir, food);
  try {
    load_scene(f.depth, f.food, f.plate, f.intrinsics);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("label index 9"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("food.pgm"), std::string::npos);
  }
}

TEST(LoadScene, UnreadableFile) {
  auto dir = temp_dir("missing");
  auto f = write_scene(dir, LabelMap(640, 480, 0));
  EXPECT_THROW(load_scene(dir / "nope.pgm", f.food, f.plate, f.intrinsics), IoError);
}

TEST(ItemExtraction, IsolatedSinglePixelsFallBelowAreaFilter) {
  // A 2x2 tiling of four labels: no pixel has an 8-neighbour with its label.
  LabelMap food(64, 48, 0);
  for (int v = 0; v < food.height(); ++v)
    for (int u = 0; u < food.width(); ++u) food(u, v) = static_cast<std::uint8_t>(1 + (u % 2) + 2 * (v % 2));
  EXPECT_TRUE(extract_items(food, 5).empty());
  EXPECT_EQ(extract_items(food, 1).size(), food.size());
}

TEST(ItemExtraction, LShapeIsOneItem) {
  LabelMap food(50, 50, 0);
  fill_block(food, 5, 5, 4, 30, 2);
  fill_block(food, 5, 31, 30, 4, 2);
  auto items = extract_items(food, 1);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(as_sets(items), oracle_components(food, 1));
}

TEST(ItemExtraction, DiagonalContactJoinsComponents) {
  LabelMap food(20, 20, 0);
  fill_block(food, 0, 0, 5, 5, 1);
  fill_block(food, 5, 5, 5, 5, 1);
  EXPECT_EQ(extract_items(food, 1).size(), 1u);
}

TEST(ItemExtraction, LabelBoundarySplitsItems) {
  LabelMap food(40, 20, 0);
  fill_block(food, 0, 0, 20, 20, 1);
  fill_block(food, 20, 0, 20, 20, 2);
  auto items = extract_items(food, 1);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].hyper, Hyper::kMainCourse);
  EXPECT_EQ(items[1].hyper, Hyper::kSideDish);
}

TEST(ItemExtraction, ScanlineOrdering) {
  LabelMap food(40, 40, 0);
  fill_block(food, 30, 2, 5, 5, 4);
  fill_block(food, 1, 10, 5, 5, 4);
  fill_block(food, 10, 2, 5, 5, 7);
  auto items = extract_items(food, 1);
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].region.front(), (PixelCoord{10, 2}));
  EXPECT_EQ(items[1].region.front(), (PixelCoord{30, 2}));
  EXPECT_EQ(items[2].region.front(), (PixelCoord{1, 10}));
}

TEST(ItemExtraction, PartitionPropertyOnRandomMaps) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    LabelMap food(48, 36, 0);
    std::uniform_int_distribution<int> label(0, 3), pos(0, 40), size(1, 12);
    for (int b = 0; b < 12; ++b) fill_block(food, pos(rng) % 40, pos(rng) % 30, size(rng) % 8 + 1, size(rng) % 6 + 1,
                                            static_cast<std::uint8_t>(label(rng)));
    const int min_area = trial % 4 == 0 ? 1 : 6;
    auto items = extract_items(food, min_area);
    EXPECT_EQ(as_sets(items), oracle_components(food, min_area));
    std::set<std::pair<int, int>> seen;
    std::size_t total = 0;
    for (const auto& it : items) {
      for (const auto& p : it.region) {
        EXPECT_EQ(food(p.u, p.v), static_cast<int>(it.hyper));
        seen.insert({p.u, p.v});
      }
      total += it.region.size();
    }
    EXPECT_EQ(seen.size(), total) << "regions overlap";
  }
}

TEST(RasterIo, RoundTripIsBitExact) {
  auto dir = temp_dir("raster");
  std::mt19937 rng(3);
  DepthImage depth(37, 23);
  for (auto& z : depth.data()) z = static_cast<std::uint16_t>(rng());
  LabelMap labels(37, 23);
  for (auto& l : labels.data()) l = static_cast<std::uint8_t>(rng());
  ColorImage color(37, 23);
  for (auto& c : color.data()) c = Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                                       static_cast<std::uint8_t>(rng())};
  for (const char* ext : {".pgm", ".png"}) {
    io::write_depth(dir / (std::string("d") + ext), depth);
    io::write_labels(dir / (std::string("l") + ext), labels);
    EXPECT_EQ(io::read_depth(dir / (std::string("d") + ext)), depth) << ext;
    EXPECT_EQ(io::read_labels(dir / (std::string("l") + ext)), labels) << ext;
  }
  io::write_color(dir / "c.ppm", color);
  io::write_color(dir / "c.png", color);
  EXPECT_EQ(io::read_color(dir / "c.ppm"), color);
  EXPECT_EQ(io::read_color(dir / "c.png"), color);
  // 8-bit file is not a depth image
  EXPECT_THROW(io::read_depth(dir / "l.pgm"), IoError);
}

TEST(RasterIo, PgmHeaderComments) {
  auto dir = temp_dir("comments");
  const std::string bytes = std::string("P5\n# made by hand\n2 1\n255\n") + char(7) + char(9);
  io::detail::write_all(dir / "x.pgm", bytes);
  auto m = io::read_labels(dir / "x.pgm");
  EXPECT_EQ(m(0, 0), 7);
  EXPECT_EQ(m(1, 0), 9);
}

TEST(Taxonomy, LookupIsTotal) {
  RecipeBook book;
  for (int i = 1; i <= 21; ++i) {
    Recipe r;
    r.category_id = i;
    r.hyper = kAllHypers[i % kHyperCount];
    book.add(r);
  }
  for (int id : book.taxonomy().all_categories()) {
    const int h = static_cast<int>(book.taxonomy().hyper_of(id));
    EXPECT_GE(h, 1);
    EXPECT_LE(h, 7);
  }
  EXPECT_THROW(book.taxonomy().hyper_of(99), ValidationError);
  Taxonomy t;
  t.add(1, Hyper::kSoup);
  EXPECT_THROW(t.add(1, Hyper::kSalad), ValidationError);
}

TEST(Taxonomy, HyperNames) {
  EXPECT_EQ(parse_hyper("main course"), Hyper::kMainCourse);
  EXPECT_EQ(parse_hyper("Side Dish"), Hyper::kSideDish);
  EXPECT_EQ(parse_hyper("dessert"), Hyper::kDessert);
  EXPECT_EQ(parse_hyper("5"), Hyper::kSoup);
  EXPECT_THROW(parse_hyper("pizza"), ValidationError);
}

TEST(Recipes, ParseAndRoundTrip) {
  const std::string csv =
      "category_id,hyper,kcal_100g,cho_100g,fat_100g,protein_100g,salt_100g,fiber_100g,density_g_per_ml\n"
      "3,soup,40,5,1.5,2,0.8,0.5,1.02\n"
      "7,sauce,300,10,28,1,1.2,0,1.1\n";
  auto book = parse_recipes(csv, "r.csv");
  ASSERT_EQ(book.size(), 2u);
  EXPECT_DOUBLE_EQ(book.at(3).per_100g.fat_g, 1.5);
  EXPECT_EQ(book.taxonomy().hyper_of(7), Hyper::kSauce);
  EXPECT_FALSE(book.at(3).portion_g.has_value());
  auto again = parse_recipes(format_recipes(book), "again.csv");
  EXPECT_EQ(format_recipes(again), format_recipes(book));
}

TEST(Recipes, RejectsNegativeAndMalformed) {
  const std::string head =
      "category_id,hyper,kcal_100g,cho_100g,fat_100g,protein_100g,salt_100g,fiber_100g,density_g_per_ml\n";
  EXPECT_THROW(parse_recipes(head + "1,soup,-1,0,0,0,0,0,1\n", "x"), ValidationError);
  EXPECT_THROW(parse_recipes(head + "1,soup,1,0,0,0,0,0,0\n", "x"), ValidationError);
  EXPECT_THROW(parse_recipes(head + "1,soup,abc,0,0,0,0,0,1\n", "x"), ValidationError);
  EXPECT_THROW(parse_recipes(head + "1,soup,1,0,0\n", "x"), ValidationError);
  EXPECT_THROW(parse_recipes("category_id,hyper\n1,soup\n", "x"), ValidationError);
}

TEST(Menu, ParseValidatesParents) {
  Taxonomy t;
  t.add(1, Hyper::kMainCourse);
  t.add(2, Hyper::kMainCourse);
  t.add(9, Hyper::kDessert);
  auto menu = menu_from_json(io::Json::parse(R"({"main_course": [2, 1], "dessert": [9]})"), t, "day_03.json");
  EXPECT_EQ(menu.of(Hyper::kMainCourse), (std::vector<int>{1, 2}));
  EXPECT_TRUE(menu.of(Hyper::kSoup).empty());
  EXPECT_EQ(menu.date, "day_03");
  EXPECT_THROW(menu_from_json(io::Json::parse(R"({"dessert": [1]})"), t, "m"), ValidationError);
  EXPECT_THROW(menu_from_json(io::Json::parse(R"({"dessert": [42]})"), t, "m"), ValidationError);
}

TEST(Intrinsics, Validation) {
  auto ok = io::Json::parse(R"({"fx":500,"fy":500,"cx":320,"cy":240,"width":640,"height":480})");
  EXPECT_NO_THROW(intrinsics_from_json(ok));
  auto bad = ok;
  bad["fx"] = 0;
  EXPECT_THROW(intrinsics_from_json(bad), ValidationError);
  bad = ok;
  bad["cx"] = 640;
  EXPECT_THROW(intrinsics_from_json(bad), ValidationError);
  bad = ok;
  bad.erase("height");
  EXPECT_THROW(intrinsics_from_json(bad), ValidationError);
}

TEST(DepthFill, NearestValidNeighbourWithinRegion) {
  DepthImage depth(10, 1, 0);
  depth(0, 0) = 400;
  depth(9, 0) = 500;
  PixelRegion region;
  for (int u = 0; u < 10; ++u) region.push_back({u, 0});
  auto filled = fill_region_depth(depth, region, {}, 0.9);
  EXPECT_EQ(filled.invalid_count, 8u);
  EXPECT_FALSE(filled.unusable);
  EXPECT_EQ(filled.depth[1], 400);
  EXPECT_EQ(filled.depth[4], 400);
  EXPECT_EQ(filled.depth[5], 500);
  EXPECT_EQ(filled.depth[8], 500);
  EXPECT_TRUE(fill_region_depth(depth, region).unusable);  // 80% missing > 50%
}

TEST(DepthFill, AllInvalidIsUnusable) {
  DepthImage depth(4, 4, 0);
  PixelRegion region{{1, 1}, {2, 1}};
  EXPECT_TRUE(fill_region_depth(depth, region).unusable);
}

TEST(NutrientVector, ArithmeticAndClamp) {
  NutrientVector a{1, 2, 3, 4, 5, 6};
  NutrientVector b{-2, 1, 0, 0, 0, 0};
  auto c = a + b;
  EXPECT_EQ(c.kcal, -1);
  EXPECT_EQ(c.clamped_nonnegative().kcal, 0);
  EXPECT_EQ((2.0 * a).fiber_g, 12);
  EXPECT_EQ((a - a), NutrientVector{});
}
