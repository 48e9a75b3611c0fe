#pragma once

// Multi-task ratio scheduling: the (QA, MA, TL) loss weights as a function
// of the training step, and the weighted total loss.

#include <cstdint>
#include <vector>

#include "mtvqa/tensor.hpp"

namespace mtvqa {

struct LossWeights {
  double qa = 1.0;
  double ma = 0.0;
  double tl = 0.0;

  /// Throws ConfigError if any weight is negative/non-finite or all are zero.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

enum class Interpolation { StepWise, Linear };

struct ScheduleAnchor {
  std::int64_t step = 0;
  LossWeights weights;
};

struct ScheduleSpec {
  std::vector<ScheduleAnchor> anchors;
  Interpolation interpolation = Interpolation::Linear;

  /// Anchors nonempty, first at step 0, steps strictly increasing, weights valid.
  void validate() const;

  static ScheduleSpec constant(LossWeights w);

  /// MA first, then TL, then QA. Anchors at 0, T/4, T/2 and T (integer
  /// division), linearly interpolated:
  ///   0    -> (0.2, 1.0, 0.2)
  ///   T/4  -> (0.5, 0.5, 1.0)
  ///   T/2  -> (1.0, 0.2, 0.5)
  ///   T    -> (1.0, 0.1, 0.1)
  /// Degenerate T collapses coinciding anchors onto the later one.
  static ScheduleSpec default_curriculum(std::int64_t total_steps);
};

LossWeights weights_at(const ScheduleSpec& spec, std::int64_t step);

/// Zeroes the weights of losses that are switched off, at every anchor.
ScheduleSpec mask_schedule(ScheduleSpec spec, bool qa, bool ma, bool tl);

/// alpha_QA * qa + alpha_MA * ma + alpha_TL * tl. Terms with weight exactly
/// zero are left out of the graph, so their tensors may be undefined.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& qa, const Tensor<T>& ma, const Tensor<T>& tl,
                     const LossWeights& w);

double total_loss(double qa, double ma, double tl, const LossWeights& w);

}  // namespace mtvqa
