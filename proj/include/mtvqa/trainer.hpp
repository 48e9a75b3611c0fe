#pragma once

// Training loop, evaluation and simple baselines.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mtvqa/config.hpp"
#include "mtvqa/model.hpp"

namespace mtvqa {

struct MetricsRow {
  std::int64_t step = 0;
  LossWeights weights;
  BatchStats stats;
};

inline constexpr const char* kMetricsHeader =
    "step,alpha_qa,alpha_ma,alpha_tl,loss_qa,loss_ma,loss_tl,loss_total,batch_acc";

std::string format_metrics_row(const MetricsRow& r);

/// Fills dataset-derived model fields (vocab size, frame width) left at 0.
RunConfig bind_to_dataset(RunConfig cfg, const DatasetMeta& meta);

struct TrainOptions {
  std::ostream* metrics = nullptr;                     // CSV sink, header included
  std::function<void(const MetricsRow&)> on_log;       // called at every logged step
};

struct TrainResult {
  Model<float> model;
  std::int64_t steps = 0;
  std::vector<MetricsRow> log;
};

/// Runs optim.total_steps Adam updates on `data`. Needs cfg.seed. Batches
/// come from a seeded per-epoch shuffle; a partial final batch is dropped.
/// A non-finite active loss throws NumericError naming the term and step.
TrainResult train(const RunConfig& cfg, const std::vector<EpisodeSample>& data,
                  const TrainOptions& opts = {});

/// Parameters exactly as train() initializes them for this config.
Model<float> initial_model(const RunConfig& cfg);

struct EvalMetrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_tl = 0.0;       // NaN without a span head
  double mean_overlap = 0.0;  // NaN without a span head
};

/// No parameter updates; per-sample results are reduced in index order, so
/// the thread count never changes the numbers.
EvalMetrics evaluate(const Model<float>& model, std::span<const EpisodeSample> data, unsigned threads = 1);

/// Picks the answer with the most tokens (first on ties).
double longest_answer_accuracy(std::span<const EpisodeSample> data);

}  // namespace mtvqa
