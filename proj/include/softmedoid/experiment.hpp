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



#ifndef SOFTMEDOID_EXPERIMENT_HPP_
#define SOFTMEDOID_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "softmedoid/attacks.hpp"
#include "softmedoid/gnn.hpp"
#include "softmedoid/graph.hpp"
#include "softmedoid/robustness_lab.hpp"
#include "softmedoid/smoothing.hpp"

namespace softmedoid {

using Json = nlohmann::json;

// Bad config path, unreadable JSON, unknown keys or out-of-range values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string type = "sbm";  // "sbm" or "files"
  SbmOptions sbm;
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  bool largest_component = true;
  bool row_normalize = false;
};

struct NamedModel {
  std::string name;
  ModelConfig config;
};

struct BiasCurveSection {
  std::vector<EstimatorSpec> estimators;
  BiasCurveOptions options;
};

struct BreakdownSection {
  std::vector<EstimatorSpec> estimators;
  Eigen::Index n = 50;
  Eigen::Index d = 2;
  // Empty: 1, floor((n - 1) / 2) and ceil((n + 1) / 2).
  std::vector<Eigen::Index> m_values;
  std::vector<double> p_schedule{1e3, 1e6, 1e9};
};

struct CertifySection {
  SmoothingConfig smoothing;
  int degree_bins = 5;
};

struct AttackSection {
  std::string method = "dice";  // dice, greedy or pgd
  std::vector<double> epsilons{0.0, 0.1, 0.25};
  GreedyOptions greedy;
  PgdOptions pgd;
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "out";
  std::vector<std::uint64_t> seeds{0};
  // Set by the paper-scale recipe; certify and attack then compare against
  // the anchors.
  bool paper_scale = false;
  DatasetConfig dataset;
  int per_class = 20;
  std::vector<NamedModel> models;
  TrainConfig train;
  std::vector<double> temperature_sweep;
  CertifySection certify;
  AttackSection attack;
  BiasCurveSection bias_curve;
  BreakdownSection breakdown;
};

// Every key is optional; unknown keys anywhere are rejected. A manifest
// written by a previous run is accepted too and replays its stored config.
ExperimentConfig ParseExperimentConfig(const Json& document);
Json LoadConfigDocument(const std::filesystem::path& path);
// The stored config when `document` is a manifest, else `document`.
Json UnwrapManifest(const Json& document);

// "0,1,2" -> {0, 1, 2}.
std::vector<std::uint64_t> ParseSeedList(const std::string& text);

struct RunOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> samples;
  bool paper_scale = false;
};

// Writes the overrides into the document so that the manifest records them.
Json ApplyOverrides(Json document, const RunOverrides& overrides);

// Settings that target the Cora ML certification and Dice numbers; the
// dataset section must point at the files.
Json PaperScaleRecipe();

struct PaperAnchor {
  std::string command;  // "certify" or "attack"
  std::string model;
  std::string metric;   // certify metric key, or "accuracy@<epsilon>"
  double value = 0.0;
  double tolerance = 0.0;
};
std::vector<PaperAnchor> PaperScaleAnchors();

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;  // sample std / sqrt(count); 0 for a single value
};
MeanSem Summarize(const std::vector<double>& values);

SparseGraph LoadDataset(const DatasetConfig& config);

// Each command returns the files it wrote, relative to the output directory.
std::vector<std::string> CmdBiasCurve(const ExperimentConfig& config, std::ostream& log);
std::vector<std::string> CmdBreakdown(const ExperimentConfig& config, std::ostream& log);
std::vector<std::string> CmdTrain(const ExperimentConfig& config, std::ostream& log);
std::vector<std::string> CmdCertify(const ExperimentConfig& config, std::ostream& log);
std::vector<std::string> CmdAttack(const ExperimentConfig& config, std::ostream& log);

// Parses, runs `command` and writes manifest.json into the output directory.
// Throws ConfigError for unknown commands and bad configs.
void RunExperiment(const std::string& command, const Json& document, std::ostream& log);

std::string ConfigHash(const Json& document);

}  // namespace softmedoid

#endif  // SOFTMEDOID_EXPERIMENT_HPP_
