#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtvqa/ablation.hpp"
#include "mtvqa/checkpoint.hpp"
#include "mtvqa/config.hpp"
#include "mtvqa/gradcheck.hpp"
#include "mtvqa/kernels.hpp"
#include "mtvqa/rng.hpp"
#include "mtvqa/trainer.hpp"

using namespace mtvqa;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON run config");
  cmd->add_option("--set", c.sets, "override, key.path=value (repeatable)");
}

RunConfig load(const Common& c) {
  return load_run_config(c.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(c.config), c.sets);
}

std::vector<EpisodeSample> load_or_die(const std::filesystem::path& dir, Split s) {
  return load_split(dir, s);
}

double json_num(double v) { return v; }

int cmd_gen_data(const Common& c, const std::string& out, unsigned threads) {
  auto cfg = load(c);
  const std::filesystem::path dir = out.empty() ? cfg.data_dir : std::filesystem::path(out);
  const auto meta = write_dataset(cfg.generator, dir, std::max(1u, threads));
  std::printf("wrote %s: train %lld, val %lld, test %lld (vocab %d, frame width %d)\n", dir.string().c_str(),
              static_cast<long long>(meta.counts[0]), static_cast<long long>(meta.counts[1]),
              static_cast<long long>(meta.counts[2]), meta.vocab_size, meta.video_feat_dim);
  for (int k = 0; k < 3; ++k) std::printf("  %-5s %s\n", to_string(static_cast<Split>(k)).c_str(), meta.checksums[k].c_str());
  return 0;
}

int cmd_train(const Common& c, std::uint64_t seed, const std::string& out) {
  auto cfg = load(c);
  cfg.seed = seed;
  if (!out.empty()) cfg.out_dir = out;
  cfg = bind_to_dataset(cfg, read_meta(cfg.data_dir));
  cfg.validate();
  const auto data = load_or_die(cfg.data_dir, Split::Train);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream(cfg.out_dir / "config.json") << cfg.to_json().dump(2) << '\n';
  std::ofstream metrics(cfg.out_dir / "metrics.csv");
  TrainOptions opts;
  opts.metrics = &metrics;
  const auto t0 = std::chrono::steady_clock::now();
  opts.on_log = [&](const MetricsRow& r) {
    if (r.step % (cfg.log_every * 10) == 0 || r.step + 1 == cfg.optim.total_steps)
      std::fprintf(stderr, "step %6lld  loss %.4f  batch acc %.3f  (%.0fs)\n", static_cast<long long>(r.step),
                   r.stats.loss_total, r.stats.accuracy(),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  const auto res = train(cfg, data, opts);
  const auto ckpt = cfg.out_dir / "checkpoint.json";
  save_checkpoint(ckpt, res.model, res.steps, cfg.hash());
  const auto m = evaluate(res.model, data, cfg.threads);
  std::printf("trained %lld steps; train accuracy %.4f; checkpoint %s\n", static_cast<long long>(res.steps),
              m.accuracy, ckpt.string().c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data, const std::string& split,
             unsigned threads) {
  std::optional<std::string> expected;
  RunConfig cfg;
  if (!c.config.empty() || !c.sets.empty()) {
    cfg = load(c);
    const auto dir = data.empty() ? cfg.data_dir : std::filesystem::path(data);
    expected = bind_to_dataset(cfg, read_meta(dir)).hash();
  }
  const std::filesystem::path dir = data.empty() ? cfg.data_dir : std::filesystem::path(data);
  const auto loaded = load_checkpoint(checkpoint, expected);
  const auto meta = read_meta(dir);
  if (loaded.model.config().vocab_size < meta.vocab_size)
    throw LoadError("checkpoint vocabulary (" + std::to_string(loaded.model.config().vocab_size) +
                    ") is smaller than the dataset's (" + std::to_string(meta.vocab_size) + ")");
  if (loaded.model.config().has_stream(Stream::VideoImg) && loaded.model.config().video_feat_dim != meta.video_feat_dim)
    throw LoadError("checkpoint frame width does not match the dataset");
  const auto samples = load_split(dir, split_from_string(split));
  const auto m = evaluate(loaded.model, samples, std::max(1u, threads));
  json j = {{"split", split},
            {"count", m.count},
            {"accuracy", m.accuracy},
            {"mean_tl", std::isnan(m.mean_tl) ? json(nullptr) : json(json_num(m.mean_tl))},
            {"mean_overlap", std::isnan(m.mean_overlap) ? json(nullptr) : json(json_num(m.mean_overlap))},
            {"step", loaded.manifest.step}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_gradcheck(const Common& c, std::uint64_t seed, int batch_size, std::size_t max_entries, double floor,
                  double step) {
  auto cfg = load(c);
  auto gen = cfg.generator;
  gen.seed = seed;
  cfg.model.vocab_size = gen.vocab_size();
  cfg.model.video_feat_dim = gen.video_feat_dim;
  cfg.model.span_head = true;
  const auto samples = generate_range(gen, 0, batch_size);
  std::vector<const EpisodeSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  GradcheckOptions opts;
  opts.max_entries = max_entries;
  opts.floor = floor;
  opts.step = step;
  opts.seed = seed;
  const auto combined = weights_at(ScheduleSpec::default_curriculum(cfg.optim.total_steps), 0);
  bool ok = true;
  for (const auto& rep : gradcheck_suite(cfg.model, derive_seed(seed, "init"), batch, combined, opts)) {
    std::printf("[%s] weights (%g, %g, %g)  %.1fs\n", rep.label.c_str(), rep.weights.qa, rep.weights.ma,
                rep.weights.tl, rep.seconds);
    for (const auto& p : rep.params)
      std::printf("  %-5s %-34s %6zu/%-6zu max rel err %.3e%s\n", p.passed ? "ok" : "FAIL", p.name.c_str(),
                  p.checked, p.total, p.max_rel_err,
                  p.reduced_step || p.skipped
                      ? ("  (" + std::to_string(p.reduced_step) + " at smaller step, " +
                         std::to_string(p.skipped) + " on a kink)").c_str()
                      : "");
    if (!rep.passed()) {
      ok = false;
      for (const auto& p : rep.params)
        if (!p.passed)
          std::fprintf(stderr, "gradcheck [%s]: %s entry %zu analytic %.9g numeric %.9g rel err %.3e\n",
                       rep.label.c_str(), p.name.c_str(), p.worst_index, p.analytic, p.numeric, p.max_rel_err);
    }
  }
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? 0 : 1;
}

int cmd_ablate(const Common& c, const std::string& out) {
  auto cfg = load(c);
  if (!out.empty()) cfg.out_dir = out;
  cfg = bind_to_dataset(cfg, read_meta(cfg.data_dir));
  const auto train_set = load_split(cfg.data_dir, Split::Train);
  const auto val_set = load_split(cfg.data_dir, Split::Val);
  const auto res = run_ablation(cfg, train_set, val_set, [](const AblationRun& r) {
    std::fprintf(stderr, "%-9s seed %-4llu val acc %.4f  (%.0fs)\n", r.variant.c_str(),
                 static_cast<unsigned long long>(r.seed), r.val_accuracy, r.seconds);
  });
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream(cfg.out_dir / "ablation.csv") << ablation_csv(res);
  std::printf("%s", ablation_table(res).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task video QA on synthetic episodes"};
  app.require_subcommand(1);
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  Common gen_c, train_c, eval_c, grad_c, abl_c;
  std::string gen_out, train_out, abl_out, ckpt, eval_data, split = "val";
  unsigned gen_threads = 1, eval_threads = 1;
  std::uint64_t train_seed = 0, grad_seed = 0;
  int grad_batch = 3;
  std::size_t grad_entries = 0;
  double grad_floor = GradcheckOptions{}.floor;
  double grad_step = GradcheckOptions{}.step;

  auto* gen = app.add_subcommand("gen-data", "write train/val/test JSONL and meta.json");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", gen_out, "output directory (default: data.dir)");
  gen->add_option("--threads", gen_threads, "generator threads");

  auto* tr = app.add_subcommand("train", "train a model and write metrics.csv and a checkpoint");
  add_common(tr, train_c);
  tr->add_option("--seed", train_seed, "run seed")->required();
  tr->add_option("-o,--out", train_out, "output directory (default: output.dir)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", ckpt, "checkpoint manifest (.json)")->required();
  ev->add_option("--data", eval_data, "dataset directory (default: data.dir)");
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--threads", eval_threads, "evaluation threads");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  add_common(gc, grad_c);
  gc->add_option("--seed", grad_seed, "seed for data and parameters");
  gc->add_option("--batch", grad_batch, "episodes in the checked batch (>= 2)");
  gc->add_option("--max-entries", grad_entries, "entries checked per tensor, 0 = all");
  gc->add_option("--floor", grad_floor, "denominator floor of the relative error");
  gc->add_option("--step", grad_step, "central difference step");

  auto* ab = app.add_subcommand("ablate", "QA / QA+MA / QA+TL / QA+MA+TL over ablation.seeds");
  add_common(ab, abl_c);
  ab->add_option("-o,--out", abl_out, "output directory (default: output.dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (kernels == "scalar") kernels::set_backend(kernels::Backend::Scalar);
    if (kernels == "avx2") kernels::set_backend(kernels::Backend::Avx2);
    if (*gen) return cmd_gen_data(gen_c, gen_out, gen_threads);
    if (*tr) return cmd_train(train_c, train_seed, train_out);
    if (*ev) return cmd_eval(eval_c, ckpt, eval_data, split, eval_threads);
    if (*gc) return cmd_gradcheck(grad_c, grad_seed, grad_batch, grad_entries, grad_floor, grad_step);
    if (*ab) return cmd_ablate(abl_c, abl_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
