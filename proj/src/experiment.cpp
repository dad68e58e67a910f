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



#include "softmedoid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <type_traits>

#include <boost/version.hpp>

namespace softmedoid {
namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";
constexpr const char* kManifestKey = "softmedoid_manifest";

[[noreturn]] void Fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

template <typename T>
T Convert(const Json& value, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!value.is_boolean()) Fail(where, "expected a boolean");
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
      Fail(where, "expected a non-negative integer");
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (!value.is_number_integer()) Fail(where, "expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!value.is_number()) Fail(where, "expected a number");
  } else {
    if (!value.is_string()) Fail(where, "expected a string");
  }
  return value.get<T>();
}

// Reads optional keys of one JSON object and rejects the ones nobody asked for.
class Reader {
 public:
  Reader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) Fail(path_, "expected an object");
  }

  bool Has(const std::string& key) {
    used_.insert(key);
    return object_.contains(key);
  }

  std::string Where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& At(const std::string& key) const { return object_.at(key); }

  template <typename T>
  void Get(const std::string& key, T& out) {
    if (Has(key)) out = Convert<T>(object_.at(key), Where(key));
  }

  template <typename T>
  void GetList(const std::string& key, std::vector<T>& out) {
    if (!Has(key)) return;
    const Json& list = object_.at(key);
    if (!list.is_array()) Fail(Where(key), "expected an array");
    out.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      out.push_back(Convert<T>(list[i], Where(key) + "[" + std::to_string(i) + "]"));
    }
  }

  void Finish() const {
    for (const auto& item : object_.items()) {
      if (!used_.count(item.key())) Fail(path_.empty() ? "config" : path_,
                                         "unknown key '" + item.key() + "'");
    }
  }

 private:
  const Json& object_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Fn>
auto Checked(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    Fail(where, e.what());
  }
}

EstimatorSpec ParseEstimator(const Json& node, const std::string& where) {
  Reader r(node, where);
  EstimatorSpec spec;
  std::string kind = "soft_medoid";
  r.Get("kind", kind);
  spec.kind = Checked(r.Where("kind"), [&] { return ParseEstimatorKind(kind); });
  if (r.Has("temperature")) {
    const Json& t = r.At("temperature");
    if (t.is_null()) {
      spec.temperature.reset();
    } else {
      spec.temperature = Convert<double>(t, r.Where("temperature"));
      if (!(*spec.temperature > 0.0)) Fail(r.Where("temperature"), "must be positive");
    }
  }
  if (spec.kind != EstimatorKind::kSoftMedoid) spec.temperature.reset();
  r.Finish();
  return spec;
}

std::vector<EstimatorSpec> ParseEstimators(Reader& r, const std::string& key,
                                           std::vector<EstimatorSpec> fallback) {
  if (!r.Has(key)) return fallback;
  const Json& list = r.At(key);
  if (!list.is_array()) Fail(r.Where(key), "expected an array");
  std::vector<EstimatorSpec> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    out.push_back(ParseEstimator(list[i], r.Where(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

EstimatorSpec Spec(EstimatorKind kind, std::optional<double> t = std::nullopt) {
  EstimatorSpec spec;
  spec.kind = kind;
  spec.temperature = t;
  return spec;
}

MessageSource ParseMessageSource(const std::string& name, const std::string& where) {
  if (name == "gcn") return MessageSource::kGcn;
  if (name == "gdc") return MessageSource::kGdc;
  Fail(where, "unknown message source '" + name + "'");
}

std::string MessageSourceName(MessageSource source) {
  return source == MessageSource::kGdc ? "gdc" : "gcn";
}

NamedModel ParseModel(const Json& node, const std::string& where) {
  Reader r(node, where);
  NamedModel model;
  AggregatorConfig aggregator;
  if (r.Has("aggregator")) {
    Reader a(r.At("aggregator"), r.Where("aggregator"));
    std::string kind = AggregatorKindName(aggregator.kind);
    a.Get("kind", kind);
    aggregator.kind = Checked(a.Where("kind"), [&] { return ParseAggregatorKind(kind); });
    a.Get("temperature", aggregator.temperature);
    a.Get("k", aggregator.k);
    a.Finish();
    Checked(r.Where("aggregator"), [&] { aggregator.Validate(); return 0; });
  }
  model.config = ModelConfig::WithAggregator(aggregator);
  r.Get("hidden", model.config.hidden);
  if (model.config.hidden < 1) Fail(r.Where("hidden"), "must be positive");
  if (r.Has("message")) {
    Reader m(r.At("message"), r.Where("message"));
    std::string source = MessageSourceName(model.config.message.source);
    m.Get("source", source);
    model.config.message.source = ParseMessageSource(source, m.Where("source"));
    m.Get("alpha", model.config.message.alpha);
    m.Get("k", model.config.message.k);
    m.Finish();
    if (!(model.config.message.alpha > 0.0 && model.config.message.alpha < 1.0)) {
      Fail(m.Where("alpha"), "must lie in (0, 1)");
    }
    if (model.config.message.k < 1) Fail(m.Where("k"), "must be positive");
  }
  model.name = AggregatorKindName(aggregator.kind) + "_" +
               MessageSourceName(model.config.message.source);
  r.Get("name", model.name);
  if (model.name.empty() || model.name.find_first_of("/\\ ,") != std::string::npos) {
    Fail(r.Where("name"), "must be non-empty without spaces, commas or slashes");
  }
  r.Finish();
  return model;
}

void ParseDataset(const Json& node, DatasetConfig& out) {
  Reader r(node, "dataset");
  r.Get("type", out.type);
  if (out.type == "sbm") {
    r.Get("n", out.sbm.n);
    r.Get("classes", out.sbm.classes);
    r.Get("p_in", out.sbm.p_in);
    r.Get("p_out", out.sbm.p_out);
    r.Get("feature_dim", out.sbm.feature_dim);
    r.Get("feature_shift", out.sbm.feature_shift);
    r.Get("feature_noise", out.sbm.feature_noise);
    r.Get("feature_scale_spread", out.sbm.feature_scale_spread);
    r.Get("seed", out.sbm.seed);
    const auto& s = out.sbm;
    if (s.n < 2 || s.classes < 1 || s.feature_dim < 1) {
      Fail("dataset", "n >= 2, classes >= 1 and feature_dim >= 1 required");
    }
    if (!(s.p_out >= 0.0 && s.p_out <= s.p_in && s.p_in <= 1.0)) {
      Fail("dataset", "need 0 <= p_out <= p_in <= 1");
    }
    if (!(s.feature_noise >= 0.0) || !(s.feature_scale_spread >= 0.0)) {
      Fail("dataset", "feature_noise and feature_scale_spread must be non-negative");
    }
  } else if (out.type == "files") {
    std::string edges, features, labels;
    r.Get("edges", edges);
    r.Get("features", features);
    r.Get("labels", labels);
    r.Get("largest_component", out.largest_component);
    r.Get("row_normalize", out.row_normalize);
    if (edges.empty() || features.empty()) Fail("dataset", "'edges' and 'features' are required");
    out.edges = edges;
    out.features = features;
    out.labels = labels;
  } else {
    Fail("dataset.type", "expected \"sbm\" or \"files\"");
  }
  r.Finish();
}

void ParseTrain(const Json& node, TrainConfig& out) {
  Reader r(node, "train");
  r.Get("lr", out.lr);
  r.Get("weight_decay", out.weight_decay);
  r.Get("max_epochs", out.max_epochs);
  r.Get("patience", out.patience);
  std::string optimizer = OptimizerName(out.optimizer);
  r.Get("optimizer", optimizer);
  out.optimizer = Checked("train.optimizer", [&] { return ParseOptimizer(optimizer); });
  r.Finish();
  Checked("train", [&] { out.Validate(); return 0; });
}

void ParseSmoothing(const Json& node, CertifySection& out) {
  Reader r(node, "smoothing");
  r.Get("p_plus", out.smoothing.p_plus);
  r.Get("p_minus", out.smoothing.p_minus);
  std::string target = SmoothingTargetName(out.smoothing.target);
  r.Get("target", target);
  out.smoothing.target = Checked("smoothing.target", [&] { return ParseSmoothingTarget(target); });
  r.Get("n_samples", out.smoothing.n_samples);
  r.Get("alpha", out.smoothing.alpha);
  r.Get("degree_bins", out.degree_bins);
  r.Finish();
  Checked("smoothing", [&] { out.smoothing.Validate(); return 0; });
  if (out.degree_bins < 1) Fail("smoothing.degree_bins", "must be positive");
}

void ParseAttack(const Json& node, AttackSection& out) {
  Reader r(node, "attack");
  r.Get("method", out.method);
  if (out.method != "dice" && out.method != "greedy" && out.method != "pgd") {
    Fail("attack.method", "expected dice, greedy or pgd");
  }
  r.GetList("epsilons", out.epsilons);
  for (double e : out.epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) Fail("attack.epsilons", "entries must lie in [0, 1]");
  }
  r.Get("shortlist", out.greedy.shortlist);
  r.Get("pgd_steps", out.pgd.steps);
  r.Get("pgd_step_size", out.pgd.step_size);
  r.Get("pgd_samples", out.pgd.samples);
  r.Finish();
  if (out.greedy.shortlist < 1 || out.pgd.steps < 0 || out.pgd.samples < 0 ||
      !(out.pgd.step_size > 0.0)) {
    Fail("attack", "shortlist >= 1, pgd_steps >= 0, pgd_samples >= 0, pgd_step_size > 0");
  }
}

void ParseBiasCurve(const Json& node, BiasCurveSection& out) {
  Reader r(node, "bias_curve");
  out.estimators = ParseEstimators(r, "estimators", out.estimators);
  r.Get("n", out.options.n);
  r.Get("d", out.options.d);
  r.Get("p", out.options.p);
  r.GetList("epsilons", out.options.epsilons);
  r.Get("trials", out.options.trials);
  r.Finish();
  if (out.options.n < 1 || out.options.d < 1 || out.options.trials < 1) {
    Fail("bias_curve", "n, d and trials must be positive");
  }
  for (double e : out.options.epsilons) {
    if (!(e >= 0.0 && e < 1.0)) Fail("bias_curve.epsilons", "entries must lie in [0, 1)");
  }
}

void ParseBreakdown(const Json& node, BreakdownSection& out) {
  Reader r(node, "breakdown");
  out.estimators = ParseEstimators(r, "estimators", out.estimators);
  r.Get("n", out.n);
  r.Get("d", out.d);
  r.GetList("m_values", out.m_values);
  r.GetList("p_schedule", out.p_schedule);
  r.Finish();
  if (out.n < 2 || out.d < 1) Fail("breakdown", "n >= 2 and d >= 1 required");
  for (Eigen::Index m : out.m_values) {
    if (m < 0 || m > out.n) Fail("breakdown.m_values", "entries must lie in [0, n]");
  }
  if (out.p_schedule.size() < 2 || !std::is_sorted(out.p_schedule.begin(), out.p_schedule.end())) {
    Fail("breakdown.p_schedule", "needs at least two increasing magnitudes");
  }
}

std::string Num(double x) {
  std::ostringstream out;
  out << x;
  return out.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void WriteJson(const fs::path& path, const Json& json) { WriteText(path, json.dump(2) + "\n"); }

// NaN goes to JSON null.
Json Real(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json SummaryJson(const std::vector<double>& values) {
  const MeanSem s = Summarize(values);
  return Json{{"mean", Real(s.mean)}, {"sem", Real(s.sem)}};
}

std::vector<int> RequireLabels(const SparseGraph& graph) {
  if (!graph.has_labels()) throw ConfigError("dataset: labels are required for this command");
  return graph.labels();
}

SplitAssignment MakeSplit(const ExperimentConfig& config, const SparseGraph& graph,
                          std::uint64_t seed) {
  SplitAssignment split = SplitNodes(graph, config.per_class, seed);
  if (split.test.empty()) throw ConfigError("split.per_class leaves no test nodes");
  return split;
}

std::vector<int> BasePredictions(const GnnModel& model, const SparseGraph& graph) {
  return Predict(Forward(model, BuildMessageMatrix(graph.adjacency(), model.config.message),
                         graph.features()));
}

const std::vector<std::string> kMetricKeys{"AC_addNdel", "AC_add", "AC_del",   "r_bar_a",
                                           "r_bar_d",    "acc_base", "acc_smooth"};

std::vector<double> MetricValues(const CertificationMetrics& m) {
  return {m.ac_add_and_del, m.ac_add, m.ac_del, m.r_bar_a, m.r_bar_d, m.acc_base, m.acc_smooth};
}

void CheckPaperAnchors(const ExperimentConfig& config, const std::string& command,
                       const std::map<std::pair<std::string, std::string>, double>& obtained,
                       std::vector<std::string>& written, std::ostream& log) {
  if (!config.paper_scale) return;
  Json rows = Json::array();
  for (const PaperAnchor& anchor : PaperScaleAnchors()) {
    if (anchor.command != command) continue;
    const auto it = obtained.find({anchor.model, anchor.metric});
    const double value = it == obtained.end() ? std::numeric_limits<double>::quiet_NaN()
                                              : it->second;
    const bool within = std::abs(value - anchor.value) <= anchor.tolerance;
    rows.push_back({{"model", anchor.model},
                    {"metric", anchor.metric},
                    {"target", anchor.value},
                    {"tolerance", anchor.tolerance},
                    {"obtained", Real(value)},
                    {"within_tolerance", within}});
    log << "paper-scale " << anchor.model << ' ' << anchor.metric << ": " << value
        << " (target " << anchor.value << " +- " << anchor.tolerance << ")"
        << (within ? "" : " OUTSIDE") << '\n';
  }
  WriteJson(config.output_dir / "paper_scale_check.json", rows);
  written.push_back("paper_scale_check.json");
}

}  // namespace

std::vector<std::uint64_t> ParseSeedList(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    if (first == std::string::npos) throw ConfigError("--seeds: empty entry in '" + text + "'");
    item = item.substr(first, last - first + 1);
    if (item.find_first_not_of("0123456789") != std::string::npos || item.size() > 19) {
      throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  return seeds;
}

Json UnwrapManifest(const Json& document) {
  if (document.is_object() && document.contains(kManifestKey)) {
    if (!document.contains("config")) throw ConfigError("manifest without a config");
    return document.at("config");
  }
  return document;
}

Json LoadConfigDocument(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return UnwrapManifest(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

ExperimentConfig ParseExperimentConfig(const Json& raw) {
  const Json document = UnwrapManifest(raw);
  Reader r(document, "");
  ExperimentConfig config;
  config.dataset.sbm = SbmOptions{200, 2, 0.05, 0.005, 4, 1.0, 0.5, 0, 1.0};
  config.bias_curve.estimators = {Spec(EstimatorKind::kMean), Spec(EstimatorKind::kMedoid),
                                  Spec(EstimatorKind::kL1),
                                  Spec(EstimatorKind::kDimensionwiseMedian),
                                  Spec(EstimatorKind::kSoftMedoid, 1.0)};
  for (int i = 0; i < 10; ++i) config.bias_curve.options.epsilons.push_back(0.05 * i);
  config.breakdown.estimators = {Spec(EstimatorKind::kMean), Spec(EstimatorKind::kMedoid),
                                 Spec(EstimatorKind::kSoftMedoid, 0.2),
                                 Spec(EstimatorKind::kSoftMedoid, 1.0),
                                 Spec(EstimatorKind::kSoftMedoid, 5.0)};

  std::string output_dir = config.output_dir.string();
  r.Get("output_dir", output_dir);
  if (output_dir.empty()) Fail("output_dir", "must not be empty");
  config.output_dir = output_dir;
  r.GetList("seeds", config.seeds);
  if (config.seeds.empty()) Fail("seeds", "must not be empty");
  r.Get("paper_scale", config.paper_scale);
  if (r.Has("dataset")) ParseDataset(r.At("dataset"), config.dataset);
  if (r.Has("split")) {
    Reader s(r.At("split"), "split");
    s.Get("per_class", config.per_class);
    s.Finish();
    if (config.per_class < 1) Fail("split.per_class", "must be positive");
  }
  if (r.Has("models")) {
    const Json& list = r.At("models");
    if (!list.is_array()) Fail("models", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      config.models.push_back(ParseModel(list[i], "models[" + std::to_string(i) + "]"));
    }
  } else {
    config.models.push_back(ParseModel(Json{{"name", "gcn"}}, "models"));
    config.models.push_back(ParseModel(
        Json{{"name", "soft_medoid_gcn"},
             {"aggregator", {{"kind", "soft_medoid"}, {"temperature", 0.5}}}},
        "models"));
  }
  std::set<std::string> names;
  for (const auto& m : config.models) {
    if (!names.insert(m.name).second) Fail("models", "duplicate name '" + m.name + "'");
  }
  if (r.Has("train")) ParseTrain(r.At("train"), config.train);
  r.GetList("temperature_sweep", config.temperature_sweep);
  for (double t : config.temperature_sweep) {
    if (!(t > 0.0)) Fail("temperature_sweep", "temperatures must be positive");
  }
  if (r.Has("smoothing")) ParseSmoothing(r.At("smoothing"), config.certify);
  if (r.Has("attack")) ParseAttack(r.At("attack"), config.attack);
  if (r.Has("bias_curve")) ParseBiasCurve(r.At("bias_curve"), config.bias_curve);
  if (r.Has("breakdown")) ParseBreakdown(r.At("breakdown"), config.breakdown);
  r.Finish();
  return config;
}

Json PaperScaleRecipe() {
  auto model = [](const std::string& name, const std::string& kind, double t,
                  const std::string& source) {
    return Json{{"name", name},
                {"hidden", 64},
                {"aggregator", {{"kind", kind}, {"temperature", t}, {"k", 0}}},
                {"message", {{"source", source}, {"alpha", 0.15}, {"k", 64}}}};
  };
  return Json{
      {"paper_scale", true},
      {"seeds", {0, 1, 2}},
      {"split", {{"per_class", 20}}},
      {"models",
       {model("vanilla_gcn", "weighted_sum", 1.0, "gcn"),
        model("vanilla_gdc", "weighted_sum", 1.0, "gdc"),
        model("sm_gdc_T1.0", "soft_medoid", 1.0, "gdc"),
        model("sm_gdc_T0.5", "soft_medoid", 0.5, "gdc"),
        model("sm_gdc_T0.2", "soft_medoid", 0.2, "gdc")}},
      {"train",
       {{"lr", 0.01},
        {"weight_decay", 5e-4},
        {"max_epochs", 3000},
        {"patience", 300},
        {"optimizer", "adam"}}},
      {"smoothing",
       {{"p_plus", 0.001},
        {"p_minus", 0.4},
        {"target", "edges"},
        {"n_samples", 10000},
        {"alpha", 0.05},
        {"degree_bins", 5}}},
      {"attack", {{"method", "dice"}, {"epsilons", {0.0, 0.1, 0.25}}}},
  };
}

std::vector<PaperAnchor> PaperScaleAnchors() {
  return {
      {"certify", "sm_gdc_T0.2", "AC_addNdel", 5.60, 0.05},
      {"certify", "sm_gdc_T0.2", "r_bar_a", 0.89, 0.05},
      {"certify", "sm_gdc_T0.2", "acc_base", 0.770, 0.02},
      {"attack", "vanilla_gcn", "accuracy@0.25", 0.785, 0.02},
      {"attack", "sm_gdc_T1.0", "accuracy@0.25", 0.801, 0.02},
  };
}

Json ApplyOverrides(Json document, const RunOverrides& overrides) {
  document = UnwrapManifest(document);
  if (!document.is_object()) throw ConfigError("config: expected an object");
  if (overrides.paper_scale) {
    const bool files = document.contains("dataset") && document["dataset"].is_object() &&
                       document["dataset"].value("type", "") == "files";
    if (!files) {
      throw ConfigError("--paper-scale needs a dataset of type \"files\" (the Cora ML graph)");
    }
    const Json recipe = PaperScaleRecipe();
    for (auto it = recipe.begin(); it != recipe.end(); ++it) document[it.key()] = it.value();
  }
  if (overrides.out) document["output_dir"] = overrides.out->string();
  if (overrides.seeds) document["seeds"] = *overrides.seeds;
  if (overrides.samples) {
    if (*overrides.samples < 1) throw ConfigError("--samples must be positive");
    if (!document.contains("smoothing")) document["smoothing"] = Json::object();
    if (!document["smoothing"].is_object()) throw ConfigError("smoothing: expected an object");
    document["smoothing"]["n_samples"] = *overrides.samples;
  }
  return document;
}

MeanSem Summarize(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  MeanSem out;
  if (finite.empty()) {
    out.mean = out.sem = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double n = static_cast<double>(finite.size());
  out.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / n;
  if (finite.size() > 1) {
    double ss = 0.0;
    for (double v : finite) ss += (v - out.mean) * (v - out.mean);
    out.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

SparseGraph LoadDataset(const DatasetConfig& config) {
  if (config.type == "sbm") return SyntheticSbm(config.sbm);
  SparseGraph graph = LoadGraph(config.edges, config.features, config.labels);
  if (config.largest_component) graph = LargestConnectedComponent(graph).graph;
  if (config.row_normalize) {
    graph = SparseGraph(graph.adjacency(), RowNormalizeL1(graph.features()), graph.labels());
  }
  return graph;
}

std::vector<std::string> CmdBiasCurve(const ExperimentConfig& config, std::ostream& log) {
  if (config.bias_curve.estimators.empty()) throw ConfigError("no estimators configured");
  if (config.bias_curve.options.epsilons.empty()) throw ConfigError("bias_curve: no epsilons");
  std::vector<std::string> written;
  for (std::uint64_t seed : config.seeds) {
    std::ostringstream csv;
    WriteBiasCurveCsvHeader(csv);
    BiasCurveOptions options = config.bias_curve.options;
    options.seed = seed;
    for (const EstimatorSpec& spec : config.bias_curve.estimators) {
      log << "bias curve " << spec.Tag() << " seed " << seed << '\n';
      WriteBiasCurveCsv(EmpiricalBiasCurve(spec, options), csv);
    }
    const std::string name = "bias_curve_seed" + std::to_string(seed) + ".csv";
    WriteText(config.output_dir / name, csv.str());
    written.push_back(name);
  }
  return written;
}

std::vector<std::string> CmdBreakdown(const ExperimentConfig& config, std::ostream& log) {
  const BreakdownSection& b = config.breakdown;
  if (b.estimators.empty()) throw ConfigError("no estimators configured");
  std::vector<Eigen::Index> ms = b.m_values;
  if (ms.empty()) ms = {1, (b.n - 1) / 2, (b.n + 2) / 2};
  std::vector<std::string> written;
  for (std::uint64_t seed : config.seeds) {
    Rng rng = StreamRng(seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix points(b.n, b.d);
    for (Eigen::Index i = 0; i < b.n; ++i)
      for (Eigen::Index j = 0; j < b.d; ++j) points(i, j) = normal(rng);
    const PointSet clean(points);
    std::ostringstream csv;
    csv << std::setprecision(12) << "estimator,T,n,m,p,norm,verdict,bound\n";
    for (const EstimatorSpec& spec : b.estimators) {
      for (Eigen::Index m : ms) {
        const auto rows = BreakdownSweep(spec, clean, m, b.p_schedule, seed);
        const std::string verdict = VerdictName(ClassifyBreakdown(rows));
        const double bound = WorstCaseBound(clean, m);
        log << "breakdown " << spec.Tag() << " m=" << m << ": " << verdict << '\n';
        for (const BreakdownRow& row : rows) {
          csv << EstimatorKindName(spec.kind) << ',' << spec.TemperatureOrZero() << ',' << b.n
              << ',' << m << ',' << row.p << ',' << row.norm << ',' << verdict << ',' << bound
              << '\n';
        }
      }
    }
    const std::string name = "breakdown_seed" + std::to_string(seed) + ".csv";
    WriteText(config.output_dir / name, csv.str());
    written.push_back(name);
  }
  return written;
}

std::vector<std::string> CmdTrain(const ExperimentConfig& config, std::ostream& log) {
  const SparseGraph graph = LoadDataset(config.dataset);
  RequireLabels(graph);
  std::vector<std::string> written;
  fs::create_directories(config.output_dir / "checkpoints");
  Json models = Json::array();
  for (const NamedModel& model : config.models) {
    Json runs = Json::array();
    std::vector<double> val_acc, test_acc;
    for (std::uint64_t seed : config.seeds) {
      const SplitAssignment split = MakeSplit(config, graph, seed);
      TrainConfig tc = config.train;
      tc.seed = seed;
      const TrainResult result = Train(model.config, graph, split, tc);
      const std::string ckpt =
          "checkpoints/" + model.name + "_seed" + std::to_string(seed) + ".txt";
      SaveCheckpoint(result.model, config.output_dir / ckpt);
      written.push_back(ckpt);
      const double va = EvasionAccuracy(result.model, graph, graph.adjacency(), split.val);
      const double ta = EvasionAccuracy(result.model, graph, graph.adjacency(), split.test);
      val_acc.push_back(va);
      test_acc.push_back(ta);
      std::ostringstream checksum;
      checksum << std::hex << std::setw(16) << std::setfill('0') << ModelChecksum(result.model);
      runs.push_back({{"seed", seed},
                      {"best_epoch", result.history.best_epoch},
                      {"val_accuracy", va},
                      {"test_accuracy", ta},
                      {"checksum", checksum.str()}});
      log << "train " << model.name << " seed " << seed << ": test accuracy " << ta << '\n';
    }
    models.push_back({{"name", model.name},
                      {"runs", runs},
                      {"val_accuracy", SummaryJson(val_acc)},
                      {"test_accuracy", SummaryJson(test_acc)}});
  }
  Json metrics{{"command", "train"}, {"models", models}};

  if (!config.temperature_sweep.empty()) {
    const NamedModel& base = config.models.front();
    if (!base.config.aggregators[0].soft()) {
      throw ConfigError("temperature_sweep needs a soft medoid aggregator in the first model");
    }
    std::ostringstream csv;
    csv << std::setprecision(12) << "T";
    for (const char* key : {"AC_addNdel", "AC_add", "AC_del", "acc_base"}) {
      csv << ',' << key << "_mean," << key << "_sem";
    }
    csv << '\n';
    Json sweep = Json::array();
    for (double t : config.temperature_sweep) {
      ModelConfig mc = base.config;
      for (auto& a : mc.aggregators) a.temperature = t;
      std::vector<std::vector<double>> columns(4);
      for (std::uint64_t seed : config.seeds) {
        const SplitAssignment split = MakeSplit(config, graph, seed);
        TrainConfig tc = config.train;
        tc.seed = seed;
        const TrainResult result = Train(mc, graph, split, tc);
        const VoteRecord votes = SampleVotes(result.model, graph, config.certify.smoothing, seed);
        const CertificationMetrics m =
            ComputeCertificationMetrics(votes, BasePredictions(result.model, graph),
                                        graph.labels(), split.test, config.certify.smoothing);
        columns[0].push_back(m.ac_add_and_del);
        columns[1].push_back(m.ac_add);
        columns[2].push_back(m.ac_del);
        columns[3].push_back(m.acc_base);
      }
      Json row{{"T", t}};
      csv << t;
      const char* keys[] = {"AC_addNdel", "AC_add", "AC_del", "acc_base"};
      for (int c = 0; c < 4; ++c) {
        const MeanSem s = Summarize(columns[c]);
        csv << ',' << s.mean << ',' << s.sem;
        row[keys[c]] = SummaryJson(columns[c]);
      }
      csv << '\n';
      sweep.push_back(row);
      log << "temperature sweep T=" << t << ": AC " << row["AC_addNdel"]["mean"] << '\n';
    }
    WriteText(config.output_dir / "temperature_sweep.csv", csv.str());
    written.push_back("temperature_sweep.csv");
    metrics["temperature_sweep"] = sweep;
  }
  WriteJson(config.output_dir / "metrics.json", metrics);
  written.push_back("metrics.json");
  return written;
}

std::vector<std::string> CmdCertify(const ExperimentConfig& config, std::ostream& log) {
  const SparseGraph graph = LoadDataset(config.dataset);
  const std::vector<int> labels = RequireLabels(graph);
  const SmoothingConfig& sc = config.certify.smoothing;
  const std::vector<Eigen::Index> degrees = graph.Degrees();
  std::vector<std::string> written;
  std::ostringstream bins_csv;
  bins_csv << std::setprecision(12)
           << "model,seed,bin,min_degree,max_degree,nodes,AC_addNdel,AC_add,AC_del\n";
  Json models = Json::array();
  std::map<std::pair<std::string, std::string>, double> obtained;
  for (const NamedModel& model : config.models) {
    Json runs = Json::array();
    std::vector<std::vector<double>> columns(kMetricKeys.size());
    for (std::uint64_t seed : config.seeds) {
      const SplitAssignment split = MakeSplit(config, graph, seed);
      TrainConfig tc = config.train;
      tc.seed = seed;
      const TrainResult result = Train(model.config, graph, split, tc);
      const VoteRecord votes = SampleVotes(result.model, graph, sc, seed);
      const CertificationMetrics m = ComputeCertificationMetrics(
          votes, BasePredictions(result.model, graph), labels, split.test, sc);
      const std::vector<double> values = MetricValues(m);
      Json run{{"seed", seed}};
      for (std::size_t k = 0; k < kMetricKeys.size(); ++k) {
        run[kMetricKeys[k]] = Real(values[k]);
        columns[k].push_back(values[k]);
      }
      runs.push_back(run);

      const CertificationGrid grid = FullCertificationGrid(votes, labels, split.test, sc);
      std::ostringstream csv;
      csv << std::setprecision(12) << "r_a,r_d,R\n";
      for (int ra = 0; ra <= grid.max_ra; ++ra) {
        for (int rd = 0; rd <= grid.max_rd; ++rd) {
          csv << ra << ',' << rd << ',' << grid.at(ra, rd) << '\n';
        }
      }
      const std::string name = "grid_" + model.name + "_seed" + std::to_string(seed) + ".csv";
      WriteText(config.output_dir / name, csv.str());
      written.push_back(name);

      const auto bins = DegreeBinnedCertifications(votes, labels, split.test, degrees, sc,
                                                   config.certify.degree_bins);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        bins_csv << model.name << ',' << seed << ',' << b << ',' << bins[b].min_degree << ','
                 << bins[b].max_degree << ',' << bins[b].size << ',' << bins[b].ac_add_and_del
                 << ',' << bins[b].ac_add << ',' << bins[b].ac_del << '\n';
      }
      log << "certify " << model.name << " seed " << seed << ": AC " << m.ac_add_and_del
          << ", smooth accuracy " << m.acc_smooth << '\n';
    }
    Json summary = Json::object();
    for (std::size_t k = 0; k < kMetricKeys.size(); ++k) {
      summary[kMetricKeys[k]] = SummaryJson(columns[k]);
      obtained[{model.name, kMetricKeys[k]}] = Summarize(columns[k]).mean;
    }
    models.push_back({{"name", model.name}, {"runs", runs}, {"summary", summary}});
  }
  WriteText(config.output_dir / "degree_bins.csv", bins_csv.str());
  written.push_back("degree_bins.csv");
  WriteJson(config.output_dir / "metrics.json", Json{{"command", "certify"}, {"models", models}});
  written.push_back("metrics.json");
  CheckPaperAnchors(config, "certify", obtained, written, log);
  return written;
}

std::vector<std::string> CmdAttack(const ExperimentConfig& config, std::ostream& log) {
  const SparseGraph graph = LoadDataset(config.dataset);
  RequireLabels(graph);
  const AttackSection& a = config.attack;
  if (a.epsilons.empty()) throw ConfigError("attack: no epsilons");
  std::vector<std::string> written;
  std::ostringstream table;
  table << std::setprecision(12) << "model,seed,epsilon,flips,accuracy\n";
  // (model, epsilon) -> accuracies over seeds
  std::map<std::pair<std::string, double>, std::vector<double>> acc;
  Json warnings = Json::array();
  for (std::uint64_t seed : config.seeds) {
    const SplitAssignment split = MakeSplit(config, graph, seed);
    TrainConfig tc = config.train;
    tc.seed = seed;
    std::vector<GnnModel> trained;
    for (const NamedModel& model : config.models) {
      trained.push_back(Train(model.config, graph, split, tc).model);
    }
    std::optional<GnnModel> surrogate;
    if (a.method != "dice") {
      ModelConfig sc = ModelConfig::WithAggregator({AggregatorKind::kWeightedSum, 1.0, 0});
      sc.hidden = config.models.front().config.hidden;
      surrogate = Train(sc, graph, split, tc).model;
    }
    for (double eps : a.epsilons) {
      const Eigen::Index budget = AttackBudget{eps}.Flips(graph.num_edges());
      AttackResult attack;
      if (a.method == "dice") {
        attack = DiceAttack(graph, budget, seed);
      } else if (a.method == "greedy") {
        attack = GreedyFlipAttack(*surrogate, graph, split.test, budget, a.greedy);
      } else {
        PgdOptions pgd = a.pgd;
        pgd.seed = seed;
        attack = PgdL0Attack(*surrogate, graph, split.test, budget, pgd);
      }
      for (const auto& w : attack.warnings) {
        warnings.push_back({{"seed", seed}, {"epsilon", eps}, {"message", w}});
        log << "warning: " << w << '\n';
      }
      const std::string name =
          "perturbations_seed" + std::to_string(seed) + "_eps" + Num(eps) + ".csv";
      WritePerturbations(attack.flips, config.output_dir / name);
      written.push_back(name);
      for (std::size_t i = 0; i < config.models.size(); ++i) {
        const double accuracy = EvasionAccuracy(trained[i], graph, attack.adjacency, split.test);
        acc[{config.models[i].name, eps}].push_back(accuracy);
        table << config.models[i].name << ',' << seed << ',' << eps << ','
              << attack.flips.size() << ',' << accuracy << '\n';
        log << "attack " << a.method << " eps " << eps << ' ' << config.models[i].name
            << " seed " << seed << ": accuracy " << accuracy << '\n';
      }
    }
  }
  WriteText(config.output_dir / "attack_accuracy.csv", table.str());
  written.push_back("attack_accuracy.csv");
  Json models = Json::array();
  std::map<std::pair<std::string, std::string>, double> obtained;
  for (const NamedModel& model : config.models) {
    Json rows = Json::array();
    for (double eps : a.epsilons) {
      const auto& values = acc[{model.name, eps}];
      rows.push_back({{"epsilon", eps}, {"accuracy", SummaryJson(values)}});
      obtained[{model.name, "accuracy@" + Num(eps)}] = Summarize(values).mean;
    }
    models.push_back({{"name", model.name}, {"results", rows}});
  }
  WriteJson(config.output_dir / "metrics.json",
            Json{{"command", "attack"},
                 {"method", a.method},
                 {"models", models},
                 {"warnings", warnings}});
  written.push_back("metrics.json");
  CheckPaperAnchors(config, "attack", obtained, written, log);
  return written;
}

std::string ConfigHash(const Json& document) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : UnwrapManifest(document).dump()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

void RunExperiment(const std::string& command, const Json& raw, std::ostream& log) {
  const Json document = UnwrapManifest(raw);
  const ExperimentConfig config = ParseExperimentConfig(document);
  using Command = std::vector<std::string> (*)(const ExperimentConfig&, std::ostream&);
  static const std::map<std::string, Command> kCommands{{"bias-curve", &CmdBiasCurve},
                                                       {"breakdown", &CmdBreakdown},
                                                       {"train", &CmdTrain},
                                                       {"certify", &CmdCertify},
                                                       {"attack", &CmdAttack}};
  const auto it = kCommands.find(command);
  if (it == kCommands.end()) throw ConfigError("unknown command '" + command + "'");
  fs::create_directories(config.output_dir);
  std::vector<std::string> outputs = it->second(config, log);
  std::sort(outputs.begin(), outputs.end());

  std::ostringstream eigen, boost, json;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  boost << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << '.'
        << BOOST_VERSION % 100;
  json << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
       << NLOHMANN_JSON_VERSION_PATCH;
  const Json manifest{{kManifestKey, 1},
                      {"command", command},
                      {"config_hash", ConfigHash(document)},
                      {"seeds", config.seeds},
                      {"versions",
                       {{"softmedoid", kVersion},
                        {"eigen", eigen.str()},
                        {"boost", boost.str()},
                        {"nlohmann_json", json.str()},
                        {"compiler", __VERSION__}}},
                      {"outputs", outputs},
                      {"config", document}};
  WriteJson(config.output_dir / "manifest.json", manifest);
}

}  // namespace softmedoid
