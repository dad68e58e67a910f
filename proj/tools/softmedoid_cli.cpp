/*
 * Copyright 2026 The Soft Medoid Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */



// softmedoid <bias-curve|breakdown|train|certify|attack> --config PATH
//            [--out DIR] [--seeds 0,1,2] [--samples N] [--paper-scale]
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 1 anything else.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "softmedoid/experiment.hpp"
#include "softmedoid/graph.hpp"
#include "softmedoid/types.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft Medoid experiments: robust aggregation, certification and attacks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds;
  int samples = 0;
  bool paper_scale = false;
  for (const char* name : {"bias-curve", "breakdown", "train", "certify", "attack"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config or a manifest from an earlier run")
        ->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seeds", seeds, "comma-separated seed list (overrides seeds)");
    sub->add_option("--samples", samples, "smoothing samples (overrides smoothing.n_samples)");
    sub->add_flag("--paper-scale", paper_scale,
                  "Cora ML recipe: 3 seeds, 10000 samples, paper hyperparameters");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    softmedoid::RunOverrides overrides;
    if (!out_dir.empty()) overrides.out = out_dir;
    if (!seeds.empty()) overrides.seeds = softmedoid::ParseSeedList(seeds);
    if (samples != 0) overrides.samples = samples;
    overrides.paper_scale = paper_scale;
    const auto document =
        softmedoid::ApplyOverrides(softmedoid::LoadConfigDocument(config_path), overrides);
    softmedoid::RunExperiment(command, document, std::cerr);
  } catch (const softmedoid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const softmedoid::GraphFormatError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const softmedoid::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
