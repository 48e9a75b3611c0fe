#include "mtvqa/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include "mtvqa/optimizer.hpp"
#include "mtvqa/rng.hpp"

namespace mtvqa {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_finite(double v, const char* name, std::int64_t step) {
  if (!std::isnan(v) && std::isfinite(v)) return;
  throw NumericError(std::string("non-finite ") + name + " (" + num(v) + ") at step " + std::to_string(step));
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  const auto& s = r.stats;
  return std::to_string(r.step) + "," + num(r.weights.qa) + "," + num(r.weights.ma) + "," + num(r.weights.tl) + "," +
         num(s.loss_qa) + "," + num(s.loss_ma) + "," + num(s.loss_tl) + "," + num(s.loss_total) + "," +
         num(s.accuracy());
}

RunConfig bind_to_dataset(RunConfig cfg, const DatasetMeta& meta) {
  if (cfg.model.vocab_size == 0) cfg.model.vocab_size = meta.vocab_size;
  if (cfg.model.vocab_size < meta.vocab_size)
    throw ConfigError("model.vocab_size " + std::to_string(cfg.model.vocab_size) + " is smaller than the dataset's " +
                      std::to_string(meta.vocab_size));
  cfg.model.video_feat_dim = meta.video_feat_dim;
  return cfg;
}

Model<float> initial_model(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("a seed is required for training");
  return Model<float>(cfg.model, derive_seed(*cfg.seed, "init"));
}

TrainResult train(const RunConfig& cfg, const std::vector<EpisodeSample>& data, const TrainOptions& opts) {
  cfg.validate();
  const auto schedule = cfg.resolved_schedule();
  TrainResult res{initial_model(cfg), 0, {}};
  const auto B = static_cast<std::size_t>(cfg.optim.batch_size);
  if (cfg.optim.total_steps > 0 && data.size() < B)
    throw ConfigError("training set has " + std::to_string(data.size()) + " samples, fewer than batch_size " +
                      std::to_string(B));

  std::vector<Tensor<float>> params;
  for (auto& p : res.model.parameters()) params.push_back(p.tensor);
  Adam<float> adam(params, cfg.optim);

  if (opts.metrics) *opts.metrics << kMetricsHeader << '\n';

  Rng order_rng(derive_seed(*cfg.seed, "batch-order"));
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::vector<const EpisodeSample*> batch(B);

  for (std::int64_t step = 0; step < cfg.optim.total_steps; ++step) {
    if (cursor + B > order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      order_rng.shuffle(order.begin(), order.end());
      cursor = 0;
    }
    for (std::size_t i = 0; i < B; ++i) batch[i] = &data[order[cursor + i]];
    cursor += B;

    const auto w = weights_at(schedule, step);
    auto obj = res.model.batch_objective(batch, w);
    if (w.qa != 0.0) check_finite(obj.stats.loss_qa, "loss_qa", step);
    if (w.ma != 0.0) check_finite(obj.stats.loss_ma, "loss_ma", step);
    if (w.tl != 0.0) check_finite(obj.stats.loss_tl, "loss_tl", step);
    check_finite(obj.stats.loss_total, "loss_total", step);

    adam.zero_grad();
    backward(obj.total);
    adam.step();
    res.steps = step + 1;

    if (step % cfg.log_every == 0 || step + 1 == cfg.optim.total_steps) {
      MetricsRow row{step, w, obj.stats};
      if (opts.metrics) *opts.metrics << format_metrics_row(row) << '\n';
      if (opts.on_log) opts.on_log(row);
      res.log.push_back(row);
    }
  }
  if (opts.metrics) opts.metrics->flush();
  return res;
}

EvalMetrics evaluate(const Model<float>& model, std::span<const EpisodeSample> data, unsigned threads) {
  const std::size_t n = data.size();
  std::vector<int> correct(n, 0);
  std::vector<double> tl(n, 0.0), overlap(n, 0.0);
  const bool span = model.config().span_head;

  auto work = [&](std::size_t w, std::size_t stride) {
    NoGradGuard no_grad;
    for (std::size_t i = w; i < n; i += stride) {
      const auto& s = data[i];
      auto out = model.forward(s, {span, false});
      correct[i] = Model<float>::predict(out.scores) == s.correct_index;
      if (span) {
        const TimeSpan p{static_cast<double>(out.span[0]), static_cast<double>(out.span[1])};
        const auto t = localization_terms(s.gt_span, p, model.config().reg_form);
        tl[i] = t.total();
        overlap[i] = t.overlap;
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& t : pool) t.join();
  }

  EvalMetrics m;
  m.count = n;
  if (n == 0) return m;
  double c = 0, l = 0, o = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += correct[i];
    l += tl[i];
    o += overlap[i];
  }
  m.accuracy = c / n;
  m.mean_tl = span ? l / n : std::nan("");
  m.mean_overlap = span ? o / n : std::nan("");
  return m;
}

double longest_answer_accuracy(std::span<const EpisodeSample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) {
    int best = 0;
    for (int i = 1; i < 5; ++i)
      if (s.answers[i].size() > s.answers[best].size()) best = i;
    hits += best == s.correct_index;
  }
  return static_cast<double>(hits) / data.size();
}

}  // namespace mtvqa
