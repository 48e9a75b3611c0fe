#include "mtvqa/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mtvqa/rng.hpp"

namespace mtvqa {

bool GradcheckReport::passed() const {
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double GradcheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_err);
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(const Model<double>& model, std::span<const EpisodeSample* const> batch,
                          const LossWeights& w, const GradcheckOptions& opts, std::string label) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport rep;
  rep.label = std::move(label);
  rep.weights = w;

  auto params = model.parameters();
  for (auto& p : params) p.tensor.zero_grad();
  {
    auto obj = model.batch_objective(batch, w);
    backward(obj.total);
  }
  auto loss_at = [&](std::uint64_t* sig) {
    NoGradGuard no_grad;
    BranchTracker tracker;
    const double v = model.batch_objective(batch, w).stats.loss_total;
    *sig = tracker.signature();
    return v;
  };
  std::uint64_t base_sig = 0;
  loss_at(&base_sig);

  for (auto& p : params) {
    ParamCheck pc;
    pc.name = p.name;
    pc.total = p.tensor.numel();
    std::vector<double> analytic(pc.total, 0.0);
    if (p.tensor.has_grad())
      std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), analytic.begin());

    std::vector<std::size_t> idx(pc.total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_entries > 0 && pc.total > opts.max_entries) {
      const auto top = static_cast<std::size_t>(
          std::max_element(analytic.begin(), analytic.end(),
                           [](double a, double b) { return std::abs(a) < std::abs(b); }) -
          analytic.begin());
      Rng rng(derive_seed(opts.seed, p.name));
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(opts.max_entries);
      if (std::find(idx.begin(), idx.end(), top) == idx.end()) idx.back() = top;
      std::sort(idx.begin(), idx.end());
    }

    auto vals = p.tensor.mutable_values();
    for (std::size_t k : idx) {
      const double orig = vals[k];
      double h = opts.step;
      double numeric = 0.0;
      bool smooth = false;
      for (int attempt = 0; attempt <= opts.kink_retries && h >= opts.min_step * (1 - 1e-9); ++attempt, h /= 10) {
        std::uint64_t su = 0, sd = 0;
        vals[k] = orig + h;
        const double up = loss_at(&su);
        vals[k] = orig - h;
        const double down = loss_at(&sd);
        vals[k] = orig;
        numeric = (up - down) / (2.0 * h);
        if (su == base_sig && sd == base_sig) {
          smooth = true;
          if (attempt > 0) ++pc.reduced_step;
          break;
        }
      }
      if (!smooth) {
        ++pc.skipped;
        continue;
      }
      const double err = relative_error(analytic[k], numeric, opts.floor);
      ++pc.checked;
      if (err > pc.max_rel_err || pc.checked == 1) {
        pc.max_rel_err = err;
        pc.worst_index = k;
        pc.analytic = analytic[k];
        pc.numeric = numeric;
      }
    }
    pc.passed = pc.max_rel_err < opts.tolerance;
    p.tensor.zero_grad();
    rep.params.push_back(std::move(pc));
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::vector<GradcheckReport> gradcheck_suite(const ModelConfig& model, std::uint64_t seed,
                                             std::span<const EpisodeSample* const> batch,
                                             const LossWeights& combined, const GradcheckOptions& opts) {
  const Model<double> m(model, seed);
  std::vector<GradcheckReport> out;
  out.push_back(gradcheck(m, batch, {1, 0, 0}, opts, "qa"));
  out.push_back(gradcheck(m, batch, {0, 1, 0}, opts, "ma"));
  out.push_back(gradcheck(m, batch, {0, 0, 1}, opts, "tl"));
  out.push_back(gradcheck(m, batch, combined, opts, "combined"));
  return out;
}

}  // namespace mtvqa
