#pragma once

// Run configuration: one JSON document plus dotted `key=value` overrides.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtvqa/encoders.hpp"
#include "mtvqa/scheduler.hpp"
#include "mtvqa/synth_data.hpp"

namespace mtvqa {

struct OptimizerConfig {
  double lr = 3e-4;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t total_steps = 2000;
};

struct AnchorSpec {
  std::optional<std::int64_t> step;
  std::optional<double> fraction;  // of total_steps
  LossWeights weights;
};

struct ScheduleConfig {
  std::string kind = "curriculum";  // curriculum | constant | anchors
  Interpolation interpolation = Interpolation::Linear;
  LossWeights weights;               // for constant
  std::vector<AnchorSpec> anchors;   // for anchors
};

struct ActiveLosses {
  bool qa = true;
  bool ma = true;
  bool tl = true;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs/latest";
  GeneratorConfig generator;
  ModelConfig model;
  ActiveLosses losses;
  ScheduleConfig schedule;
  OptimizerConfig optim;
  int log_every = 10;
  unsigned threads = 1;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3, 4, 5};

  /// Schedule over optim.total_steps with inactive losses masked out.
  ScheduleSpec resolved_schedule() const;

  /// Cross-field checks (e.g. B >= 2 with MA active). Model vocab may still
  /// be 0 here; it is filled from the dataset before training.
  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  /// Hash of everything that shapes a training run (paths excluded).
  std::string hash() const;
};

/// Sets a dotted key in a JSON object. The value is parsed as JSON when it
/// parses, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Reads the file (if given), applies overrides in order and validates keys.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides);

nlohmann::json model_config_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace mtvqa
