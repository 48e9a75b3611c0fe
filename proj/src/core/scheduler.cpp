#include "mtvqa/scheduler.hpp"

#include <cmath>
#include <string>

#include "mtvqa/ops.hpp"

namespace mtvqa {

void LossWeights::validate() const {
  for (double w : {qa, ma, tl})
    if (!std::isfinite(w) || w < 0.0)
      throw ConfigError("loss weights must be finite and nonnegative");
  if (qa == 0.0 && ma == 0.0 && tl == 0.0) throw ConfigError("at least one loss weight must be positive");
}

void ScheduleSpec::validate() const {
  if (anchors.empty()) throw ConfigError("schedule has no anchors");
  if (anchors.front().step != 0)
    throw ConfigError("first schedule anchor must be at step 0, got " + std::to_string(anchors.front().step));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    anchors[i].weights.validate();
    if (i > 0 && anchors[i].step <= anchors[i - 1].step)
      throw ConfigError("schedule anchor steps must be strictly increasing (step " +
                        std::to_string(anchors[i].step) + " after " + std::to_string(anchors[i - 1].step) + ")");
  }
}

ScheduleSpec ScheduleSpec::constant(LossWeights w) { return {{{0, w}}, Interpolation::StepWise}; }

ScheduleSpec ScheduleSpec::default_curriculum(std::int64_t total_steps) {
  const std::int64_t T = std::max<std::int64_t>(total_steps, 0);
  const ScheduleAnchor raw[] = {
      {0, {0.2, 1.0, 0.2}},
      {T / 4, {0.5, 0.5, 1.0}},
      {T / 2, {1.0, 0.2, 0.5}},
      {T, {1.0, 0.1, 0.1}},
  };
  ScheduleSpec spec;
  spec.interpolation = Interpolation::Linear;
  for (const auto& a : raw) {
    if (!spec.anchors.empty() && spec.anchors.back().step == a.step)
      spec.anchors.back() = a;
    else
      spec.anchors.push_back(a);
  }
  return spec;
}

LossWeights weights_at(const ScheduleSpec& spec, std::int64_t step) {
  if (spec.anchors.empty()) throw ConfigError("weights_at: empty schedule");
  if (step < 0) throw ConfigError("weights_at: negative step " + std::to_string(step));
  const auto& a = spec.anchors;
  std::size_t k = 0;
  while (k + 1 < a.size() && a[k + 1].step <= step) ++k;
  if (spec.interpolation == Interpolation::StepWise || k + 1 == a.size()) return a[k].weights;
  const double f = static_cast<double>(step - a[k].step) / static_cast<double>(a[k + 1].step - a[k].step);
  const auto& lo = a[k].weights;
  const auto& hi = a[k + 1].weights;
  auto lerp = [f](double x, double y) { return f == 0.0 ? x : x + (y - x) * f; };
  return {lerp(lo.qa, hi.qa), lerp(lo.ma, hi.ma), lerp(lo.tl, hi.tl)};
}

ScheduleSpec mask_schedule(ScheduleSpec spec, bool qa, bool ma, bool tl) {
  for (auto& a : spec.anchors) {
    if (!qa) a.weights.qa = 0.0;
    if (!ma) a.weights.ma = 0.0;
    if (!tl) a.weights.tl = 0.0;
  }
  return spec;
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& qa, const Tensor<T>& ma, const Tensor<T>& tl,
                     const LossWeights& w) {
  Tensor<T> acc;
  auto accumulate = [&acc](const Tensor<T>& term, double weight, const char* name) {
    if (weight == 0.0) return;
    if (!term.defined()) throw GraphError(std::string("total_loss: ") + name + " has positive weight but was not computed");
    auto scaled = ops::scale(term, static_cast<T>(weight));
    acc = acc.defined() ? ops::add(acc, scaled) : scaled;
  };
  accumulate(qa, w.qa, "QA loss");
  accumulate(ma, w.ma, "MA loss");
  accumulate(tl, w.tl, "TL loss");
  if (!acc.defined()) throw ConfigError("total_loss: all weights are zero");
  return acc;
}

double total_loss(double qa, double ma, double tl, const LossWeights& w) {
  double acc = 0.0;
  if (w.qa != 0.0) acc += w.qa * qa;
  if (w.ma != 0.0) acc += w.ma * ma;
  if (w.tl != 0.0) acc += w.tl * tl;
  return acc;
}

template Tensor<float> total_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                  const LossWeights&);
template Tensor<double> total_loss(const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, const LossWeights&);

}  // namespace mtvqa
