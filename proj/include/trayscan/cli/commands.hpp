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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trayscan/core/error.hpp"
#include "trayscan/core/loaders.hpp"
#include "trayscan/core/parallel.hpp"
#include "trayscan/core/text_io.hpp"
#include "trayscan/metrics/metrics.hpp"
#include "trayscan/nutrition/nutrition.hpp"
#include "trayscan/pipeline.hpp"
#include "trayscan/protonet/io.hpp"
#include "trayscan/protonet/protonet.hpp"
#include "trayscan/synthscene/dataset.hpp"

namespace trayscan::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitPartial = 2, kExitInternal = 3 };

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

/// Pulls typed values out of a config object and rejects keys nobody asked for.
class ConfigReader {
 public:
  ConfigReader(const io::Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError(name_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const io::Json::exception& e) {
      throw ValidationError(name_ + "." + key + ": " + e.what());
    }
  }

  void get_path(const std::string& key, fs::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(name_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const io::Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

inline void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string("missing required setting '") + what + "'");
}

inline void require_file(const fs::path& p, const char* what) {
  require_path(p, what);
  if (!fs::is_regular_file(p)) throw ValidationError(std::string(what) + ": no such file " + p.string());
}

inline void require_workers(int workers) {
  if (workers < 1) throw ValidationError("workers must be >= 1");
}

}  // namespace detail

/// Records what produced a directory. The hash covers the config without the
/// worker count, which never changes outputs.
inline void write_run_manifest(const fs::path& dir, const std::string& command, const io::Json& config,
                               const io::Json& seeds, const io::Json& metadata = io::Json::object()) {
  io::Json hashed = config;
  hashed.erase("workers");
  io::Json j{{"command", command},
             {"version", kToolVersion},
             {"dataset_version", synthscene::kDatasetVersion},
             {"config", config},
             {"config_hash", "fnv1a64:" + hex64(fnv1a64(hashed.dump()))},
             {"seeds", seeds}};
  if (!metadata.empty()) j["metadata"] = metadata;
  io::write_json(dir / "run_manifest.json", j);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateConfig {
  fs::path out;
  synthscene::DatasetOptions dataset;

  void validate() const {
    detail::require_path(out, "out");
    dataset.validate();
    detail::require_workers(dataset.workers);
  }

  io::Json to_json() const {
    io::Json j = synthscene::dataset_options_to_json(dataset);
    j["out"] = out.string();
    j["workers"] = dataset.workers;
    return j;
  }

  static SimulateConfig from_json(const io::Json& j) {
    if (!j.is_object()) throw ValidationError("simulate config: expected a JSON object");
    SimulateConfig c;
    io::Json rest = j;
    detail::ConfigReader r(j, "simulate config");
    r.get_path("out", c.out);
    int workers = default_worker_count();
    r.get("workers", workers);
    rest.erase("out");
    rest.erase("workers");
    c.dataset = synthscene::dataset_options_from_json(rest, {}, "simulate config");
    c.dataset.workers = workers;
    c.validate();
    return c;
  }
};

inline int run_simulate(const SimulateConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto manifest = synthscene::generate_dataset(cfg.dataset, cfg.out);
  write_run_manifest(cfg.out, "simulate", cfg.to_json(), {{"seed", cfg.dataset.seed}});
  log << "simulate: wrote " << manifest.meals.size() << " meal pairs to " << cfg.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainConfig {
  fs::path dataset;
  /// Alternative to the dataset's support set: a samples CSV.
  fs::path samples;
  fs::path out;
  protonet::TrainOptions train;
  int dim = protonet::kDefaultEmbeddingDim;
  std::uint64_t init_seed = 1;

  void validate() const {
    if (dataset.empty() == samples.empty()) throw ValidationError("train: give exactly one of 'dataset' or 'samples'");
    if (!dataset.empty()) detail::require_file(dataset, "dataset");
    if (!samples.empty()) detail::require_file(samples, "samples");
    detail::require_path(out, "out");
    if (train.iterations < 0) throw ValidationError("train: iterations must be >= 0");
    if (!(train.learning_rate >= 0.0)) throw ValidationError("train: learning_rate must be >= 0");
    if (train.ways < 2 || train.shots < 1 || train.queries < 1) {
      throw ValidationError("train: need ways >= 2, shots >= 1, queries >= 1");
    }
    if (dim < 1) throw ValidationError("train: dim must be positive");
  }

  io::Json to_json() const {
    return io::Json{{"dataset", dataset.string()},  {"samples", samples.string()},
                    {"out", out.string()},          {"iterations", train.iterations},
                    {"learning_rate", train.learning_rate}, {"ways", train.ways},
                    {"shots", train.shots},         {"queries", train.queries},
                    {"seed", train.seed},           {"dim", dim},
                    {"init_seed", init_seed}};
  }

  static TrainConfig from_json(const io::Json& j) {
    TrainConfig c;
    detail::ConfigReader r(j, "train config");
    r.get_path("dataset", c.dataset);
    r.get_path("samples", c.samples);
    r.get_path("out", c.out);
    r.get("iterations", c.train.iterations);
    r.get("learning_rate", c.train.learning_rate);
    r.get("ways", c.train.ways);
    r.get("shots", c.train.shots);
    r.get("queries", c.train.queries);
    r.get("seed", c.train.seed);
    r.get("dim", c.dim);
    r.get("init_seed", c.init_seed);
    r.finish();
    c.validate();
    return c;
  }
};

inline protonet::Dataset training_samples(const TrainConfig& cfg) {
  if (!cfg.samples.empty()) return protonet::load_samples(cfg.samples);
  const auto m = synthscene::load_manifest(cfg.dataset);
  return protonet::load_samples(m.resolve(m.support));
}

inline int run_train(const TrainConfig& cfg, std::ostream& log) {
  cfg.validate();
  const protonet::Dataset data = training_samples(cfg);
  if (data.empty()) throw ValidationError("train: no samples");
  const int features = static_cast<int>(data.front().features.size());
  for (const auto& s : data) {
    if (static_cast<int>(s.features.size()) != features) {
      throw ValidationError("train: sample " + std::to_string(s.id) + " has " + std::to_string(s.features.size()) +
                            " features, expected " + std::to_string(features));
    }
  }
  auto init = protonet::AffineEmbedding::random(cfg.dim, features, cfg.init_seed);
  const auto result = protonet::train(data, std::move(init), cfg.train);

  fs::create_directories(cfg.out);
  protonet::save_checkpoint(cfg.out / "checkpoint.csv", result.embedding,
                            {cfg.train.seed, cfg.train.iterations});
  std::ostringstream loss;
  loss << "iteration,loss\n";
  for (std::size_t i = 0; i < result.loss.size(); ++i) loss << i << ',' << io::format_double(result.loss[i]) << '\n';
  io::write_text_atomic(cfg.out / "loss.csv", loss.str());
  write_run_manifest(cfg.out, "train", cfg.to_json(), {{"episodes", cfg.train.seed}, {"init", cfg.init_seed}});

  log << "train: " << data.size() << " samples, " << cfg.train.iterations << " iterations";
  if (!result.loss.empty()) {
    log << ", loss " << result.loss.front() << " -> " << result.loss.back();
  }
  log << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateConfig {
  fs::path dataset;
  fs::path checkpoint;
  fs::path out;
  bool menu = true;
  bool oracle_segmentation = false;
  bool oracle_recognition = false;
  /// "test", "train" or "all"; ignored when `meals` is non-empty.
  std::string split = "test";
  std::vector<std::string> meals;
  /// "train": least-squares densities from the training split, "recipe": table values.
  std::string densities = "train";
  int min_item_area = kDefaultMinItemArea;
  pipeline::PipelineOptions pipeline;
  int workers = default_worker_count();

  void validate() const {
    detail::require_file(dataset, "dataset");
    if (!oracle_recognition) detail::require_file(checkpoint, "checkpoint");
    detail::require_path(out, "out");
    if (split != "test" && split != "train" && split != "all") {
      throw ValidationError("estimate: split must be test, train or all (got '" + split + "')");
    }
    if (densities != "train" && densities != "recipe") {
      throw ValidationError("estimate: densities must be train or recipe (got '" + densities + "')");
    }
    if (min_item_area < 1) throw ValidationError("estimate: min_item_area must be positive");
    if (pipeline.ransac.iterations < 1 || !(pipeline.ransac.inlier_threshold_mm > 0.0)) {
      throw ValidationError("estimate: RANSAC needs iterations >= 1 and a positive threshold");
    }
    if (!(pipeline.max_invalid_fraction >= 0.0 && pipeline.max_invalid_fraction <= 1.0)) {
      throw ValidationError("estimate: max_invalid_fraction outside [0, 1]");
    }
    detail::require_workers(workers);
  }

  io::Json to_json() const {
    return io::Json{{"dataset", dataset.string()},
                    {"checkpoint", checkpoint.string()},
                    {"out", out.string()},
                    {"menu", menu},
                    {"oracle_segmentation", oracle_segmentation},
                    {"oracle_recognition", oracle_recognition},
                    {"split", split},
                    {"meals", meals},
                    {"densities", densities},
                    {"min_item_area", min_item_area},
                    {"min_plate_area", pipeline.min_plate_area},
                    {"ransac_iterations", pipeline.ransac.iterations},
                    {"ransac_threshold_mm", pipeline.ransac.inlier_threshold_mm},
                    {"ransac_min_inlier_fraction", pipeline.ransac.min_inlier_fraction},
                    {"ransac_seed", pipeline.ransac_seed},
                    {"max_invalid_fraction", pipeline.max_invalid_fraction},
                    {"workers", workers}};
  }

  static EstimateConfig from_json(const io::Json& j) {
    EstimateConfig c;
    detail::ConfigReader r(j, "estimate config");
    r.get_path("dataset", c.dataset);
    r.get_path("checkpoint", c.checkpoint);
    r.get_path("out", c.out);
    r.get("menu", c.menu);
    r.get("oracle_segmentation", c.oracle_segmentation);
    r.get("oracle_recognition", c.oracle_recognition);
    r.get("split", c.split);
    r.get("meals", c.meals);
    r.get("densities", c.densities);
    r.get("min_item_area", c.min_item_area);
    r.get("min_plate_area", c.pipeline.min_plate_area);
    r.get("ransac_iterations", c.pipeline.ransac.iterations);
    r.get("ransac_threshold_mm", c.pipeline.ransac.inlier_threshold_mm);
    r.get("ransac_min_inlier_fraction", c.pipeline.ransac.min_inlier_fraction);
    r.get("ransac_seed", c.pipeline.ransac_seed);
    r.get("max_invalid_fraction", c.pipeline.max_invalid_fraction);
    r.get("workers", c.workers);
    r.finish();
    c.validate();
    return c;
  }
};

/// Everything shared by the meals of one estimate run. Not movable: the
/// density model points into the recipe book.
struct EstimationContext {
  synthscene::DatasetManifest manifest;
  RecipeBook recipes;
  nutrition::DensityModel densities;
  pipeline::PipelineOptions pipeline;
  std::optional<pipeline::Recognizer> recognizer;
  std::map<std::string, DailyMenu> menus;

  EstimationContext() = default;
  EstimationContext(const EstimationContext&) = delete;
  EstimationContext& operator=(const EstimationContext&) = delete;
};

/// Densities fitted through the origin on (served volume, served weight) of
/// every visible item in the training split.
inline nutrition::DensityModel fit_training_densities(const synthscene::DatasetManifest& m, const RecipeBook* recipes) {
  std::map<int, std::vector<nutrition::VolumeWeight>> samples;
  for (const auto& meal : m.meals) {
    if (meal.split != "train") continue;
    for (const auto& it : synthscene::load_truth(m, meal).items) {
      if (it.plate == PlateType::kPackagedContainer || !(it.before_ml > 0.0)) continue;
      samples[it.category].push_back({it.before_ml, it.before_g});
    }
  }
  return nutrition::fit_densities(samples, recipes);
}

inline std::unique_ptr<EstimationContext> load_context(const EstimateConfig& cfg) {
  auto ctx = std::make_unique<EstimationContext>();
  ctx->manifest = synthscene::load_manifest(cfg.dataset);
  const auto& m = ctx->manifest;
  ctx->recipes = load_recipes(m.resolve(m.recipes));
  ctx->densities = cfg.densities == "train" ? fit_training_densities(m, &ctx->recipes)
                                            : nutrition::DensityModel(&ctx->recipes);
  ctx->pipeline = cfg.pipeline;
  ctx->pipeline.plate_models = geometry::load_plate_models(m.resolve(m.plate_models));
  if (!cfg.oracle_recognition) {
    auto [embedding, info] = protonet::load_checkpoint(cfg.checkpoint);
    const auto support = protonet::load_samples(m.resolve(m.support));
    ctx->recognizer = pipeline::Recognizer::build(std::move(embedding), support, ctx->recipes.taxonomy());
  }
  if (cfg.menu) {
    for (const auto& meal : m.meals) {
      if (!ctx->menus.count(meal.menu)) {
        ctx->menus.emplace(meal.menu, load_menu(m.resolve(meal.menu), ctx->recipes.taxonomy()));
      }
    }
  }
  return ctx;
}

struct MealResult {
  std::string meal_id;
  std::optional<nutrition::IntakeReport> report;
  std::vector<std::string> warnings;
  std::string error;
};

inline MealResult estimate_meal(const EstimationContext& ctx, const synthscene::MealEntry& meal,
                                const EstimateConfig& cfg) {
  MealResult out;
  out.meal_id = meal.id;
  const auto& m = ctx.manifest;
  const bool predicted = !cfg.oracle_segmentation;
  auto before = pipeline::analyze_scene(
      synthscene::load_stage(m, meal, CaptureStage::kBefore, predicted, cfg.min_item_area), ctx.pipeline);
  auto after = pipeline::analyze_scene(
      synthscene::load_stage(m, meal, CaptureStage::kAfter, predicted, cfg.min_item_area), ctx.pipeline);
  for (const auto& w : before.warnings) out.warnings.push_back("before: " + w);
  for (const auto& w : after.warnings) out.warnings.push_back("after: " + w);

  if (cfg.oracle_recognition) {
    std::map<int, int> truth;
    for (const auto& it : synthscene::load_truth(m, meal).items) truth[it.instance] = it.category;
    pipeline::oracle_recognize(before.record.items, truth);
    pipeline::oracle_recognize(after.record.items, truth);
  } else {
    const DailyMenu* menu = cfg.menu ? &ctx.menus.at(meal.menu) : nullptr;
    pipeline::recognize_items(before.record.items, *ctx.recognizer, menu);
    pipeline::recognize_items(after.record.items, *ctx.recognizer, menu);
  }
  out.report = pipeline::estimate_intake(before, after, ctx.recipes, ctx.densities, {}, meal.id);
  return out;
}

inline std::vector<const synthscene::MealEntry*> select_meals(const synthscene::DatasetManifest& m,
                                                              const EstimateConfig& cfg) {
  std::vector<const synthscene::MealEntry*> out;
  if (!cfg.meals.empty()) {
    for (const auto& id : cfg.meals) out.push_back(&m.meal(id));
  } else {
    for (const auto& meal : m.meals) {
      if (cfg.split == "all" || meal.split == cfg.split) out.push_back(&meal);
    }
  }
  if (out.empty()) throw ValidationError("estimate: no meals selected");
  return out;
}

struct EstimateSummary {
  std::vector<MealResult> results;
  std::size_t failed = 0;
};

/// Writes reports/<meal>.json and .csv per meal, then intake.csv, summary.json
/// and run_manifest.json.
inline EstimateSummary estimate_all(const EstimateConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto ctx = load_context(cfg);
  const auto meals = select_meals(ctx->manifest, cfg);
  EstimateSummary summary;
  summary.results.resize(meals.size());
  parallel_for(meals.size(), cfg.workers, [&](std::size_t i) {
    MealResult& r = summary.results[i];
    r.meal_id = meals[i]->id;
    try {
      r = estimate_meal(*ctx, *meals[i], cfg);
      io::Json j = nutrition::report_to_json(*r.report);
      j["warnings"] = r.warnings;
      io::write_json(cfg.out / "reports" / (r.meal_id + ".json"), j);
      io::write_text_atomic(cfg.out / "reports" / (r.meal_id + ".csv"),
                            nutrition::kIntakeCsvHeader + "\n" + nutrition::intake_csv_row(r.meal_id, r.report->total) + "\n");
    } catch (const std::exception& e) {
      r.report.reset();
      r.error = e.what();
    }
  });

  std::ostringstream csv;
  csv << nutrition::kIntakeCsvHeader << '\n';
  io::Json ok = io::Json::array(), failed = io::Json::array(), warnings = io::Json::object();
  for (const auto& r : summary.results) {
    if (r.report) {
      csv << nutrition::intake_csv_row(r.meal_id, r.report->total) << '\n';
      ok.push_back(r.meal_id);
      if (!r.warnings.empty()) warnings[r.meal_id] = r.warnings;
    } else {
      ++summary.failed;
      failed.push_back({{"meal_id", r.meal_id}, {"error", r.error}});
      log << "estimate: " << r.meal_id << " failed: " << r.error << "\n";
    }
  }
  io::write_text_atomic(cfg.out / "intake.csv", csv.str());
  io::write_json(cfg.out / "summary.json", {{"succeeded", ok}, {"failed", failed}, {"warnings", warnings}});
  write_run_manifest(cfg.out, "estimate", cfg.to_json(), {{"ransac", cfg.pipeline.ransac_seed}});
  log << "estimate: " << ok.size() << " of " << summary.results.size() << " meals estimated into "
      << cfg.out.string() << "\n";
  return summary;
}

inline int run_estimate(const EstimateConfig& cfg, std::ostream& log) {
  return estimate_all(cfg, log).failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalConfig {
  fs::path dataset;
  /// Output directory of an estimate run.
  fs::path reports;
  fs::path out;
  bool oracle_segmentation = false;
  bool oracle_recognition = false;
  /// Score the predicted label maps of the evaluated meals.
  bool segmentation = true;
  int workers = default_worker_count();

  void validate() const {
    detail::require_file(dataset, "dataset");
    detail::require_path(reports, "reports");
    detail::require_file(reports / "intake.csv", "reports");
    detail::require_path(out, "out");
    detail::require_workers(workers);
  }

  io::Json to_json() const {
    return io::Json{{"dataset", dataset.string()},
                    {"reports", reports.string()},
                    {"out", out.string()},
                    {"oracle_segmentation", oracle_segmentation},
                    {"oracle_recognition", oracle_recognition},
                    {"segmentation", segmentation},
                    {"workers", workers}};
  }

  static EvalConfig from_json(const io::Json& j) {
    EvalConfig c;
    detail::ConfigReader r(j, "eval config");
    r.get_path("dataset", c.dataset);
    r.get_path("reports", c.reports);
    r.get_path("out", c.out);
    r.get("oracle_segmentation", c.oracle_segmentation);
    r.get("oracle_recognition", c.oracle_recognition);
    r.get("segmentation", c.segmentation);
    r.get("workers", c.workers);
    r.finish();
    c.validate();
    return c;
  }
};

/// One AgreementStats row per nutrient, estimated totals against truth.
inline std::map<std::string, metrics::AgreementStats> nutrient_agreement(
    const std::map<std::string, NutrientVector>& estimated, const std::map<std::string, NutrientVector>& truth) {
  std::map<std::string, metrics::AgreementStats> out;
  for (std::size_t n = 0; n < NutrientVector::kCount; ++n) {
    std::vector<double> pred, gt;
    for (const auto& [id, v] : estimated) {
      pred.push_back(v[n]);
      gt.push_back(truth.at(id)[n]);
    }
    out[std::string(NutrientVector::kNames[n])] = metrics::agreement(pred, gt);
  }
  return out;
}

inline std::string agreement_csv(const std::map<std::string, metrics::AgreementStats>& stats) {
  std::ostringstream csv;
  csv << metrics::kAgreementCsvHeader << '\n';
  for (std::size_t n = 0; n < NutrientVector::kCount; ++n) {
    const std::string name(NutrientVector::kNames[n]);
    csv << metrics::agreement_csv_row(name, stats.at(name)) << '\n';
  }
  return csv.str();
}

struct EvalResult {
  std::map<std::string, metrics::AgreementStats> agreement;
  std::optional<std::map<std::string, metrics::AgreementStats>> ablation;
  std::optional<metrics::RecognitionAccuracy> recognition;
  int exit_code = kExitOk;
};

/// Intake totals of an estimate run, checked against the manifest.
inline std::map<std::string, NutrientVector> load_estimates(const fs::path& reports,
                                                            const synthscene::DatasetManifest& m) {
  const auto path = reports / "intake.csv";
  auto estimates = nutrition::parse_intake_csv(io::read_text(path), path.string());
  std::vector<std::string> orphans;
  for (const auto& [id, v] : estimates) {
    if (std::none_of(m.meals.begin(), m.meals.end(), [&](const auto& e) { return e.id == id; })) orphans.push_back(id);
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& id : orphans) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError("eval: reports for meals not in the dataset: " + list);
  }
  if (estimates.empty()) throw ValidationError("eval: " + path.string() + " lists no meals");
  return estimates;
}

inline EvalResult evaluate(const EvalConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto m = synthscene::load_manifest(cfg.dataset);
  const auto estimates = load_estimates(cfg.reports, m);

  std::map<std::string, NutrientVector> truth;
  std::map<std::string, std::map<int, int>> instance_category;
  for (const auto& [id, v] : estimates) {
    const auto t = synthscene::load_truth(m, m.meal(id));
    truth[id] = t.total;
    for (const auto& it : t.items) instance_category[id][it.instance] = it.category;
  }

  EvalResult result;
  result.agreement = nutrient_agreement(estimates, truth);
  io::write_text_atomic(cfg.out / "agreement.csv", agreement_csv(result.agreement));
  for (std::size_t n = 0; n < NutrientVector::kCount; ++n) {
    std::vector<double> pred, gt;
    for (const auto& [id, v] : estimates) {
      pred.push_back(v[n]);
      gt.push_back(truth.at(id)[n]);
    }
    io::write_text_atomic(cfg.out / "bland_altman" / (std::string(NutrientVector::kNames[n]) + ".csv"),
                          metrics::bland_altman_csv(pred, gt));
  }

  // Recognition accuracy from the per-item reports, where they exist.
  std::vector<int> predicted, actual;
  std::vector<Hyper> hypers;
  for (const auto& [id, v] : estimates) {
    const auto path = cfg.reports / "reports" / (id + ".json");
    if (!fs::exists(path)) continue;
    const io::Json report = io::read_json(path);
    for (const auto& item : report.at("items")) {
      if (item.at("gt_instance").is_null()) continue;
      const auto& cats = instance_category.at(id);
      auto it = cats.find(item.at("gt_instance").get<int>());
      if (it == cats.end()) continue;
      predicted.push_back(item.at("category").get<int>());
      actual.push_back(it->second);
      hypers.push_back(parse_hyper(item.at("hyper").get<std::string>()));
    }
  }
  if (!actual.empty()) {
    result.recognition = metrics::recognition_accuracy(predicted, actual, hypers);
    std::ostringstream csv;
    csv << "hyper,items,accuracy_pct\n";
    for (const auto& [h, acc] : result.recognition->per_hyper) {
      csv << hyper_name(h) << ',' << result.recognition->counts.at(h) << ',' << io::format_double(acc) << '\n';
    }
    csv << "mean," << actual.size() << ',' << io::format_double(result.recognition->mean) << '\n';
    csv << "overall," << actual.size() << ',' << io::format_double(result.recognition->overall) << '\n';
    io::write_text_atomic(cfg.out / "recognition.csv", csv.str());
  }

  if (cfg.segmentation) {
    std::map<Hyper, std::pair<double, int>> iou;
    double miou = 0.0, acc = 0.0, fmin = 0.0, fsum = 0.0;
    int captures = 0;
    for (const auto& [id, v] : estimates) {
      const auto& meal = m.meal(id);
      for (CaptureStage s : {CaptureStage::kBefore, CaptureStage::kAfter}) {
        const auto& f = meal.stage(s);
        const auto score = metrics::score_segmentation(io::read_labels(m.resolve(f.food_pred)),
                                                       io::read_labels(m.resolve(f.food)));
        for (const auto& [h, x] : score.iou) iou[h].first += x, ++iou[h].second;
        miou += score.mean_iou;
        acc += score.pixel_accuracy;
        fmin += score.fscores.f_min;
        fsum += score.fscores.f_sum;
        ++captures;
      }
    }
    std::ostringstream csv;
    csv << "metric,value\n";
    for (const auto& [h, s] : iou) csv << "iou_" << hyper_name(h) << ',' << io::format_double(s.first / s.second) << '\n';
    csv << "mean_iou," << io::format_double(miou / captures) << '\n';
    csv << "pixel_accuracy," << io::format_double(acc / captures) << '\n';
    csv << "f_min," << io::format_double(fmin / captures) << '\n';
    csv << "f_sum," << io::format_double(fsum / captures) << '\n';
    io::write_text_atomic(cfg.out / "segmentation.csv", csv.str());
  }

  if (cfg.oracle_segmentation || cfg.oracle_recognition) {
    // Rerun the estimate that produced the reports with the oracle stages swapped in.
    EstimateConfig rerun = EstimateConfig::from_json(io::read_json(cfg.reports / "run_manifest.json").at("config"));
    rerun.oracle_segmentation = rerun.oracle_segmentation || cfg.oracle_segmentation;
    rerun.oracle_recognition = rerun.oracle_recognition || cfg.oracle_recognition;
    rerun.meals.clear();
    for (const auto& [id, v] : estimates) rerun.meals.push_back(id);
    rerun.out = cfg.out / "ablation";
    rerun.workers = cfg.workers;
    const auto summary = estimate_all(rerun, log);
    if (summary.failed) result.exit_code = kExitPartial;
    std::map<std::string, NutrientVector> ablated;
    for (const auto& r : summary.results) {
      if (r.report) ablated[r.meal_id] = r.report->total;
    }
    if (!ablated.empty()) {
      result.ablation = nutrient_agreement(ablated, truth);
      io::write_text_atomic(cfg.out / "agreement_ablation.csv", agreement_csv(*result.ablation));
    }
  }

  write_run_manifest(cfg.out, "eval", cfg.to_json(), io::Json::object(),
                     {{"f_sum_weighting", "area"}, {"meals", estimates.size()}});
  log << "eval: " << estimates.size() << " meals scored into " << cfg.out.string() << "\n";
  for (std::size_t n = 0; n < NutrientVector::kCount; ++n) {
    const std::string name(NutrientVector::kNames[n]);
    const auto& s = result.agreement.at(name);
    log << "  " << name << ": MRE " << s.mre_pct << "%";
    if (s.correlation) log << ", r " << s.correlation->r;
    if (result.ablation) log << " (oracle MRE " << result.ablation->at(name).mre_pct << "%)";
    log << "\n";
  }
  if (result.recognition) log << "  recognition mean accuracy " << result.recognition->mean << "%\n";
  return result;
}

inline int run_eval(const EvalConfig& cfg, std::ostream& log) { return evaluate(cfg, log).exit_code; }

/// Maps exceptions escaping a command onto the documented exit codes.
template <typename F>
int guarded(const char* command, std::ostream& log, F&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    log << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    log << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    log << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    log << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    log << command << ": internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace trayscan::cli
