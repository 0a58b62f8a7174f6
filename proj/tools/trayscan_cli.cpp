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

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trayscan/cli/commands.hpp"

namespace {

using trayscan::io::Json;

/// Flags recorded as a JSON patch applied over the optional config file.
struct Settings {
  std::string config_file;
  Json patch = Json::object();

  Json resolve() const {
    Json j = config_file.empty() ? Json::object() : trayscan::io::read_json(config_file);
    if (!j.is_object()) throw trayscan::ValidationError(config_file + ": expected a JSON object");
    j.merge_patch(patch);
    return j;
  }
};

template <typename T>
CLI::Option* setting(CLI::App* app, Settings& s, const std::string& flag, const std::string& key, const std::string& help) {
  return app->add_option_function<T>(flag, [&s, key](const T& v) { s.patch[key] = v; }, help);
}

void switch_pair(CLI::App* app, Settings& s, const std::string& key, const std::string& on, const std::string& off,
                 const std::string& help) {
  auto* a = app->add_flag_callback(on, [&s, key] { s.patch[key] = true; }, help);
  auto* b = app->add_flag_callback(off, [&s, key] { s.patch[key] = false; }, "disable: " + help);
  a->excludes(b);
}

void config_option(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config_file, "JSON config; flags override its values")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = trayscan::cli;
  CLI::App app{"Nutrient intake estimation from before/after RGB-D tray captures"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1);

  Settings sim, tr, est, ev;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset of meal pairs");
  config_option(simulate, sim);
  setting<std::string>(simulate, sim, "-o,--out", "out", "output directory (created if missing)");
  setting<int>(simulate, sim, "--meals", "meals", "number of meal pairs");
  setting<int>(simulate, sim, "--categories", "categories", "number of fine-grained categories");
  setting<std::uint64_t>(simulate, sim, "--seed", "seed", "generator seed");
  setting<double>(simulate, sim, "--noise", "noise_sigma_mm", "depth noise sigma at 400 mm (mm)");
  setting<double>(simulate, sim, "--dropout", "dropout", "fraction of depth pixels dropped");
  setting<double>(simulate, sim, "--test-fraction", "test_fraction", "fraction of meals in the test split");
  setting<int>(simulate, sim, "--support-shots", "support_shots", "annotated samples per category");
  setting<int>(simulate, sim, "-j,--workers", "workers", "worker threads");

  auto* train = app.add_subcommand("train", "Train the embedding on few-shot episodes");
  config_option(train, tr);
  setting<std::string>(train, tr, "-d,--dataset", "dataset", "dataset manifest (uses its support set)");
  setting<std::string>(train, tr, "--samples", "samples", "samples CSV instead of a dataset");
  setting<std::string>(train, tr, "-o,--out", "out", "output directory");
  setting<int>(train, tr, "--iterations", "iterations", "SGD iterations");
  setting<double>(train, tr, "--lr,--learning-rate", "learning_rate", "learning rate");
  setting<int>(train, tr, "--ways", "ways", "categories per episode");
  setting<int>(train, tr, "--shots", "shots", "support samples per category");
  setting<int>(train, tr, "--queries", "queries", "query samples per episode");
  setting<int>(train, tr, "--dim", "dim", "embedding dimension");
  setting<std::uint64_t>(train, tr, "--seed", "seed", "episode sampling seed");
  setting<std::uint64_t>(train, tr, "--init-seed", "init_seed", "initialisation seed");

  auto* estimate = app.add_subcommand("estimate", "Estimate nutrient intake for meal pairs");
  config_option(estimate, est);
  setting<std::string>(estimate, est, "-d,--dataset", "dataset", "dataset manifest");
  setting<std::string>(estimate, est, "-c,--checkpoint", "checkpoint", "embedding checkpoint");
  setting<std::string>(estimate, est, "-o,--out", "out", "output directory");
  switch_pair(estimate, est, "menu", "--menu", "--no-menu", "restrict candidates to the daily menu");
  estimate->add_flag_callback("--oracle-segmentation", [&] { est.patch["oracle_segmentation"] = true; },
                              "use the true food label maps");
  estimate->add_flag_callback("--oracle-recognition", [&] { est.patch["oracle_recognition"] = true; },
                              "use the true categories");
  setting<std::string>(estimate, est, "--split", "split", "test, train or all");
  setting<std::vector<std::string>>(estimate, est, "--meals", "meals", "meal ids (overrides --split)")
      ->delimiter(',');
  setting<std::string>(estimate, est, "--densities", "densities", "train (fitted) or recipe");
  setting<int>(estimate, est, "--ransac-iterations", "ransac_iterations", "RANSAC hypotheses");
  setting<double>(estimate, est, "--ransac-threshold", "ransac_threshold_mm", "RANSAC inlier threshold (mm)");
  setting<std::uint64_t>(estimate, est, "--ransac-seed", "ransac_seed", "RANSAC seed");
  setting<double>(estimate, est, "--max-invalid-fraction", "max_invalid_fraction",
                  "largest fraction of missing depth filled per item");
  setting<int>(estimate, est, "-j,--workers", "workers", "worker threads");

  auto* eval = app.add_subcommand("eval", "Score estimates against ground truth");
  config_option(eval, ev);
  setting<std::string>(eval, ev, "-d,--dataset", "dataset", "dataset manifest");
  setting<std::string>(eval, ev, "-r,--reports", "reports", "output directory of an estimate run");
  setting<std::string>(eval, ev, "-o,--out", "out", "output directory");
  eval->add_flag_callback("--oracle-segmentation", [&] { ev.patch["oracle_segmentation"] = true; },
                          "also rerun estimation with true label maps");
  eval->add_flag_callback("--oracle-recognition", [&] { ev.patch["oracle_recognition"] = true; },
                          "also rerun estimation with true categories");
  switch_pair(eval, ev, "segmentation", "--segmentation", "--no-segmentation", "score the predicted label maps");
  setting<int>(eval, ev, "-j,--workers", "workers", "worker threads for ablation reruns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? cli::kExitOk : cli::kExitValidation;
  }

  std::ostream& log = std::cerr;
  if (*simulate) {
    return cli::guarded("simulate", log, [&] { return cli::run_simulate(cli::SimulateConfig::from_json(sim.resolve()), log); });
  }
  if (*train) {
    return cli::guarded("train", log, [&] { return cli::run_train(cli::TrainConfig::from_json(tr.resolve()), log); });
  }
  if (*estimate) {
    return cli::guarded("estimate", log, [&] { return cli::run_estimate(cli::EstimateConfig::from_json(est.resolve()), log); });
  }
  return cli::guarded("eval", log, [&] { return cli::run_eval(cli::EvalConfig::from_json(ev.resolve()), log); });
}
