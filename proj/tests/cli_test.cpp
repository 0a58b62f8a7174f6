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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "trayscan/cli/commands.hpp"

using namespace trayscan;
using namespace trayscan::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trayscan_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

SimulateConfig small_dataset(const fs::path& out, int meals = 4) {
  return SimulateConfig::from_json({{"out", out.string()}, {"meals", meals}, {"seed", 21}, {"test_fraction", 0.5},
                                    {"workers", 1}});
}

fs::path make_dataset(const fs::path& root, int meals = 4) {
  std::ostringstream log;
  EXPECT_EQ(run_simulate(small_dataset(root, meals), log), kExitOk);
  return root / "manifest.json";
}

fs::path make_checkpoint(const fs::path& manifest, const fs::path& out) {
  std::ostringstream log;
  EXPECT_EQ(run_train(TrainConfig::from_json({{"dataset", manifest.string()}, {"out", out.string()},
                                              {"iterations", 20}, {"dim", 64}}),
                      log),
            kExitOk);
  return out / "checkpoint.csv";
}

EstimateConfig estimate_config(const fs::path& manifest, const fs::path& out, io::Json extra = io::Json::object()) {
  io::Json j{{"dataset", manifest.string()}, {"out", out.string()}, {"workers", 1}};
  j.merge_patch(extra);
  return EstimateConfig::from_json(j);
}

}  // namespace

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(SimulateConfig::from_json({{"out", "x"}, {"meal", 3}}), ValidationError);
  EXPECT_THROW(SimulateConfig::from_json({{"out", "x"}, {"meals", 0}}), ValidationError);
  EXPECT_THROW(SimulateConfig::from_json({{"meals", 3}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"out", "x"}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"samples", "/nonexistent.csv"}, {"out", "x"}}), ValidationError);
  EXPECT_THROW(EvalConfig::from_json({{"dataset", "/nonexistent.json"}, {"reports", "r"}, {"out", "o"}}),
               ValidationError);
  EXPECT_THROW(SimulateConfig::from_json({{"out", "x"}, {"meals", "three"}}), ValidationError);
}

TEST(Config, FailuresMapToExitCodes) {
  std::ostringstream log;
  EXPECT_EQ(guarded("t", log, [] { return 0; }), kExitOk);
  EXPECT_EQ(guarded("t", log, []() -> int { throw ValidationError("bad"); }), kExitValidation);
  EXPECT_EQ(guarded("t", log, []() -> int { throw IoError("gone"); }), kExitValidation);
  EXPECT_EQ(guarded("t", log, []() -> int { throw std::logic_error("oops"); }), kExitInternal);
  EXPECT_NE(log.str().find("internal error: oops"), std::string::npos);
}

TEST(Config, HashIgnoresWorkersOnly) {
  const fs::path a = scratch("hash_a"), b = scratch("hash_b");
  fs::create_directories(a);
  fs::create_directories(b);
  write_run_manifest(a, "x", {{"k", 1}, {"workers", 1}}, io::Json::object());
  write_run_manifest(b, "x", {{"k", 1}, {"workers", 8}}, io::Json::object());
  const auto ha = io::read_json(a / "run_manifest.json").at("config_hash");
  EXPECT_EQ(ha, io::read_json(b / "run_manifest.json").at("config_hash"));
  write_run_manifest(b, "x", {{"k", 2}, {"workers", 1}}, io::Json::object());
  EXPECT_NE(ha, io::read_json(b / "run_manifest.json").at("config_hash"));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Simulate, CreatesMissingDirectoryAndRerunsIdentically) {
  const fs::path root = scratch("simulate") / "nested" / "ds";
  make_dataset(root, 2);
  ASSERT_TRUE(fs::exists(root / "manifest.json"));
  ASSERT_TRUE(fs::exists(root / "run_manifest.json"));
  const auto first = snapshot(root);
  fs::remove_all(root);
  make_dataset(root, 2);
  EXPECT_EQ(snapshot(root), first);
}

TEST(Train, ZeroIterationsWriteTheInitialisation) {
  const fs::path root = scratch("train_zero");
  const auto manifest = make_dataset(root / "ds", 1);
  std::ostringstream log;
  const auto cfg = TrainConfig::from_json(
      {{"dataset", manifest.string()}, {"out", (root / "t").string()}, {"iterations", 0}, {"dim", 16}, {"init_seed", 5}});
  ASSERT_EQ(run_train(cfg, log), kExitOk);
  const auto [f, info] = protonet::load_checkpoint(root / "t" / "checkpoint.csv");
  const auto init = protonet::AffineEmbedding::random(16, protonet::kHistogramDim, 5);
  EXPECT_EQ(f.weight, init.weight);
  EXPECT_EQ(f.bias, init.bias);
  EXPECT_EQ(info.iterations, 0);
  EXPECT_EQ(slurp(root / "t" / "loss.csv"), "iteration,loss\n");
}

TEST(Train, FixedSeedGivesIdenticalBytes) {
  const fs::path root = scratch("train_seed");
  const auto manifest = make_dataset(root / "ds", 1);
  make_checkpoint(manifest, root / "a");
  make_checkpoint(manifest, root / "b");
  EXPECT_EQ(slurp(root / "a" / "checkpoint.csv"), slurp(root / "b" / "checkpoint.csv"));
  EXPECT_EQ(slurp(root / "a" / "loss.csv"), slurp(root / "b" / "loss.csv"));
  const std::string loss = slurp(root / "a" / "loss.csv");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 21);
}

TEST(Estimate, IdenticalCapturesGiveZeroIntake) {
  const fs::path root = scratch("estimate_same");
  const auto manifest_path = make_dataset(root / "ds", 2);
  auto m = synthscene::load_manifest(manifest_path);
  for (auto& meal : m.meals) meal.after = meal.before;
  io::write_json(root / "ds" / "same.json", synthscene::manifest_to_json(m));
  std::ostringstream log;
  const auto cfg = estimate_config(root / "ds" / "same.json", root / "est",
                                   {{"oracle_recognition", true}, {"split", "all"}, {"densities", "recipe"}});
  const auto summary = estimate_all(cfg, log);
  ASSERT_EQ(summary.failed, 0u);
  for (const auto& r : summary.results) {
    ASSERT_TRUE(r.report);
    EXPECT_FALSE(r.report->items.empty());
    for (std::size_t i = 0; i < NutrientVector::kCount; ++i) EXPECT_EQ(r.report->total[i], 0.0) << r.meal_id;
  }
}

TEST(Estimate, WritesPerMealReportsAndRunManifest) {
  const fs::path root = scratch("estimate_files");
  const auto manifest = make_dataset(root / "ds", 2);
  std::ostringstream log;
  ASSERT_EQ(run_estimate(estimate_config(manifest, root / "est", {{"oracle_recognition", true}}), log), kExitOk);
  const auto m = synthscene::load_manifest(manifest);
  for (const auto& meal : m.meals) {
    const bool test = meal.split == "test";
    EXPECT_EQ(fs::exists(root / "est" / "reports" / (meal.id + ".json")), test) << meal.id;
    EXPECT_EQ(fs::exists(root / "est" / "reports" / (meal.id + ".csv")), test) << meal.id;
  }
  const auto intake = nutrition::parse_intake_csv(slurp(root / "est" / "intake.csv"), "intake");
  EXPECT_EQ(intake.size(), 1u);
  const auto run = io::read_json(root / "est" / "run_manifest.json");
  EXPECT_EQ(run.at("command"), "estimate");
  EXPECT_EQ(run.at("config").at("oracle_recognition"), true);
  EXPECT_NE(log.str().find("1 of 1 meals"), std::string::npos);
}

TEST(Estimate, FailedMealIsReportedAndOthersContinue) {
  const fs::path root = scratch("estimate_partial");
  const auto manifest = make_dataset(root / "ds", 4);
  const auto m = synthscene::load_manifest(manifest);
  io::write_text_atomic(m.resolve(m.meals[2].after.depth), "not a png");
  std::ostringstream log;
  const auto cfg = estimate_config(manifest, root / "est", {{"oracle_recognition", true}});
  EXPECT_EQ(run_estimate(cfg, log), kExitPartial);
  EXPECT_TRUE(fs::exists(root / "est" / "reports" / (m.meals[3].id + ".json")));
  EXPECT_FALSE(fs::exists(root / "est" / "reports" / (m.meals[2].id + ".json")));
  const auto summary = io::read_json(root / "est" / "summary.json");
  ASSERT_EQ(summary.at("failed").size(), 1u);
  EXPECT_EQ(summary.at("failed")[0].at("meal_id"), m.meals[2].id);
  EXPECT_NE(log.str().find(m.meals[2].id + " failed"), std::string::npos);
}

TEST(Estimate, MenuNeverLowersRecognitionAccuracy) {
  const fs::path root = scratch("estimate_menu");
  const auto manifest = make_dataset(root / "ds", 4);
  const auto ckpt = make_checkpoint(manifest, root / "train");
  std::ostringstream log;
  std::map<bool, double> acc;
  for (bool menu : {false, true}) {
    const fs::path est = root / (menu ? "menu" : "nomenu");
    ASSERT_EQ(run_estimate(estimate_config(manifest, est, {{"checkpoint", ckpt.string()}, {"menu", menu}}), log),
              kExitOk);
    const auto r = evaluate(EvalConfig::from_json({{"dataset", manifest.string()},
                                                   {"reports", est.string()},
                                                   {"out", (root / "eval" / (menu ? "m" : "n")).string()},
                                                   {"segmentation", false}}),
                            log);
    ASSERT_TRUE(r.recognition);
    acc[menu] = r.recognition->mean;
  }
  EXPECT_GE(acc[true], acc[false]);
}

TEST(Eval, ReportsEqualToTruthGiveZeroErrorRows) {
  const fs::path root = scratch("eval_truth");
  const auto manifest = make_dataset(root / "ds", 4);
  const auto m = synthscene::load_manifest(manifest);
  std::string csv = nutrition::kIntakeCsvHeader + "\n";
  for (const auto& meal : m.meals) csv += nutrition::intake_csv_row(meal.id, synthscene::load_truth(m, meal).total) + "\n";
  io::write_text_atomic(root / "reports" / "intake.csv", csv);
  std::ostringstream log;
  const auto r = evaluate(EvalConfig::from_json({{"dataset", manifest.string()},
                                                 {"reports", (root / "reports").string()},
                                                 {"out", (root / "eval").string()}}),
                          log);
  EXPECT_EQ(r.exit_code, kExitOk);
  for (const auto& [name, s] : r.agreement) {
    EXPECT_EQ(s.n, 4u);
    EXPECT_EQ(s.mae, 0.0) << name;
    EXPECT_EQ(s.mre_pct, 0.0) << name;
    ASSERT_TRUE(s.correlation);
    EXPECT_NEAR(s.correlation->r, 1.0, 1e-12) << name;
  }
  const auto table = io::parse_csv(slurp(root / "eval" / "agreement.csv"), "agreement");
  EXPECT_EQ(table.rows.size(), NutrientVector::kCount);
  EXPECT_TRUE(fs::exists(root / "eval" / "segmentation.csv"));
  EXPECT_TRUE(fs::exists(root / "eval" / "bland_altman" / "kcal.csv"));
  EXPECT_FALSE(fs::exists(root / "eval" / "recognition.csv"));
  EXPECT_EQ(io::read_json(root / "eval" / "run_manifest.json").at("metadata").at("f_sum_weighting"), "area");
}

TEST(Eval, OrphanMealIdsAreListed) {
  const fs::path root = scratch("eval_orphans");
  const auto manifest = make_dataset(root / "ds", 1);
  io::write_text_atomic(root / "reports" / "intake.csv",
                        nutrition::kIntakeCsvHeader + "\nmeal_0000,1,1,1,1,1,1\nmeal_0777,1,1,1,1,1,1\nlunch,1,1,1,1,1,1\n");
  std::ostringstream log;
  const auto cfg = EvalConfig::from_json(
      {{"dataset", manifest.string()}, {"reports", (root / "reports").string()}, {"out", (root / "eval").string()}});
  EXPECT_EQ(guarded("eval", log, [&] { return run_eval(cfg, log); }), kExitValidation);
  EXPECT_NE(log.str().find("lunch, meal_0777"), std::string::npos) << log.str();
}

TEST(Eval, OracleAblationIsolatesTheVolumeStage) {
  const fs::path root = scratch("eval_ablation");
  const auto manifest = make_dataset(root / "ds", 4);
  const auto ckpt = make_checkpoint(manifest, root / "train");
  std::ostringstream log;
  ASSERT_EQ(run_estimate(estimate_config(manifest, root / "est", {{"checkpoint", ckpt.string()}}), log), kExitOk);
  const auto r = evaluate(EvalConfig::from_json({{"dataset", manifest.string()},
                                                 {"reports", (root / "est").string()},
                                                 {"out", (root / "eval").string()},
                                                 {"oracle_segmentation", true},
                                                 {"oracle_recognition", true},
                                                 {"workers", 1}}),
                          log);
  ASSERT_TRUE(r.ablation);
  const auto rerun = io::read_json(root / "eval" / "ablation" / "run_manifest.json").at("config");
  EXPECT_EQ(rerun.at("oracle_segmentation"), true);
  EXPECT_EQ(rerun.at("oracle_recognition"), true);
  EXPECT_EQ(rerun.at("meals").size(), 2u);
  // With true labels and categories every item's category is its true one.
  const auto m = synthscene::load_manifest(manifest);
  for (const auto& id : rerun.at("meals")) {
    std::map<int, int> truth;
    for (const auto& it : synthscene::load_truth(m, m.meal(id)).items) truth[it.instance] = it.category;
    const auto report = io::read_json(root / "eval" / "ablation" / "reports" / (id.get<std::string>() + ".json"));
    for (const auto& item : report.at("items")) {
      EXPECT_EQ(item.at("category").get<int>(), truth.at(item.at("gt_instance").get<int>()));
    }
  }
  EXPECT_TRUE(fs::exists(root / "eval" / "agreement_ablation.csv"));
}

#ifdef TRAYSCAN_CLI_PATH
namespace {

int run_tool(const std::string& args) {
  const std::string cmd = std::string(TRAYSCAN_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Binary, ExitCodes) {
  const fs::path root = scratch("binary");
  fs::create_directories(root);
  io::write_text_atomic(root / "bad.json", "{\"meals\": ");
  io::write_text_atomic(root / "unknown.json", "{\"meals\": 1, \"colour\": 3}");
  EXPECT_EQ(run_tool("--help"), 0);
  EXPECT_EQ(run_tool(""), 1);
  EXPECT_EQ(run_tool("simulate --config " + (root / "bad.json").string() + " -o " + (root / "x").string()), 1);
  EXPECT_EQ(run_tool("simulate --config " + (root / "unknown.json").string() + " -o " + (root / "x").string()), 1);
  EXPECT_EQ(run_tool("estimate --menu --no-menu"), 1);
  EXPECT_EQ(run_tool("eval -d " + (root / "missing.json").string() + " -r " + root.string() + " -o " +
                     (root / "e").string()),
            1);
}

TEST(Binary, FlagsOverrideConfigFile) {
  const fs::path root = scratch("binary_config");
  fs::create_directories(root);
  io::write_text_atomic(root / "sim.json", "{\"meals\": 3, \"seed\": 4, \"workers\": 1}");
  ASSERT_EQ(run_tool("simulate --config " + (root / "sim.json").string() + " --meals 1 -o " + (root / "ds").string()),
            0);
  const auto run = io::read_json(root / "ds" / "run_manifest.json").at("config");
  EXPECT_EQ(run.at("meals"), 1);
  EXPECT_EQ(run.at("seed"), 4);
  EXPECT_EQ(synthscene::load_manifest(root / "ds" / "manifest.json").meals.size(), 1u);
}
#endif
