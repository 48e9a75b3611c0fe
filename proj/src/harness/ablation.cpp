#include "mtvqa/ablation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace mtvqa {

std::vector<AblationVariant> ablation_variants() {
  return {{"QA", false, false}, {"QA+MA", true, false}, {"QA+TL", false, true}, {"QA+MA+TL", true, true}};
}

RunConfig variant_config(const RunConfig& base, const AblationVariant& v, std::uint64_t seed) {
  RunConfig c = base;
  c.seed = seed;
  c.losses = {true, v.ma, v.tl};
  c.model.span_head = v.tl;
  // The baseline is the plain QA objective, not a masked curriculum.
  if (!v.ma && !v.tl) {
    c.schedule = ScheduleConfig{};
    c.schedule.kind = "constant";
    c.schedule.weights = {1.0, 0.0, 0.0};
  }
  return c;
}

AblationRow summarize(const std::string& variant, std::vector<double> accuracies) {
  AblationRow row{variant, std::move(accuracies), 0.0, 0.0};
  const auto n = row.accuracies.size();
  if (n == 0) return row;
  for (double a : row.accuracies) row.mean += a;
  row.mean /= n;
  if (n > 1) {
    double ss = 0.0;
    for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
    row.stddev = std::sqrt(ss / (n - 1));
  }
  return row;
}

AblationResult run_ablation(const RunConfig& base, const std::vector<EpisodeSample>& train_set,
                            const std::vector<EpisodeSample>& val_set,
                            const std::function<void(const AblationRun&)>& on_run) {
  if (base.ablation_seeds.empty()) throw ConfigError("ablation.seeds is empty");
  AblationResult res;
  for (const auto& v : ablation_variants()) {
    std::vector<double> accs;
    for (auto seed : base.ablation_seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto cfg = variant_config(base, v, seed);
      const auto trained = train(cfg, train_set);
      const auto m = evaluate(trained.model, val_set, cfg.threads);
      AblationRun run{v.name, seed, m.accuracy,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      if (on_run) on_run(run);
      res.runs.push_back(run);
      accs.push_back(m.accuracy);
    }
    res.rows.push_back(summarize(v.name, std::move(accs)));
  }
  return res;
}

std::string ablation_csv(const AblationResult& r) {
  std::string out = "variant,seeds,mean_val_acc,std_val_acc\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f\n", row.variant.c_str(), row.accuracies.size(), row.mean,
                  row.stddev);
    out += buf;
  }
  return out;
}

std::string ablation_table(const AblationResult& r) {
  std::string out = "variant      seeds  val acc (mean +- std)   delta vs QA\n";
  const double base = r.rows.empty() ? 0.0 : r.rows.front().mean;
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-12s %5zu  %6.2f%% +- %5.2f%%       %+6.2f pp\n", row.variant.c_str(),
                  row.accuracies.size(), 100 * row.mean, 100 * row.stddev, 100 * (row.mean - base));
    out += buf;
  }
  return out;
}

}  // namespace mtvqa
