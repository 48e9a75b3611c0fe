#pragma once

// {QA, QA+MA, QA+TL, QA+MA+TL} x seeds with otherwise identical configs.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtvqa/config.hpp"
#include "mtvqa/trainer.hpp"

namespace mtvqa {

struct AblationVariant {
  std::string name;
  bool ma = false;
  bool tl = false;
};

std::vector<AblationVariant> ablation_variants();

/// The base config with the variant's losses switched on/off. Inactive
/// losses are masked out of the schedule; without TL the span head is
/// dropped from the model.
RunConfig variant_config(const RunConfig& base, const AblationVariant& v, std::uint64_t seed);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct AblationRow {
  std::string variant;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (0 for one seed)
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> rows;
};

AblationResult run_ablation(const RunConfig& base, const std::vector<EpisodeSample>& train_set,
                            const std::vector<EpisodeSample>& val_set,
                            const std::function<void(const AblationRun&)>& on_run = {});

AblationRow summarize(const std::string& variant, std::vector<double> accuracies);

std::string ablation_csv(const AblationResult& r);
std::string ablation_table(const AblationResult& r);

}  // namespace mtvqa
