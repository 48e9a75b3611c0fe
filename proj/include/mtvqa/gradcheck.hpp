#pragma once

// Central finite differences against analytic gradients, in double.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtvqa/config.hpp"
#include "mtvqa/model.hpp"

namespace mtvqa {

struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Entries checked per tensor; 0 checks every entry. When sampling, the
  // entry with the largest analytic gradient is always included.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
  // If +-step crosses a kink (a non-smooth op picks a different branch than
  // at the unperturbed point), retry with step/10 up to this many times,
  // then skip the entry.
  int kink_retries = 3;
  // Retries never go below this step. Smaller steps are roundoff-dominated
  // in double: ~1e-10 absolute at 1e-6, which swamps gradients near 1e-6.
  double min_step = 1e-5;
};

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t total = 0;
  std::size_t reduced_step = 0;  // entries evaluated with a smaller step
  std::size_t skipped = 0;       // entries sitting on a kink at every step tried
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::string label;
  LossWeights weights;
  std::vector<ParamCheck> params;
  double seconds = 0.0;
  bool passed() const;
  double max_rel_err() const;
};

double relative_error(double analytic, double numeric, double floor);

GradcheckReport gradcheck(const Model<double>& model, std::span<const EpisodeSample* const> batch,
                          const LossWeights& w, const GradcheckOptions& opts, std::string label = "");

/// QA alone, MA alone, TL alone and the combined objective at the schedule's
/// step-0 weights, all on the same model and batch.
std::vector<GradcheckReport> gradcheck_suite(const ModelConfig& model, std::uint64_t seed,
                                             std::span<const EpisodeSample* const> batch,
                                             const LossWeights& combined, const GradcheckOptions& opts);

}  // namespace mtvqa
