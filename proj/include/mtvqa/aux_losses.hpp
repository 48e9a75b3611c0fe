#pragma once

// Auxiliary supervision: video/subtitle modality alignment with in-batch
// negatives, and temporal localization of the question's source span.

#include <vector>

#include "mtvqa/encoders.hpp"
#include "mtvqa/tensor.hpp"

namespace mtvqa {

/// Span in normalized clip time. Ground-truth spans satisfy
/// 0 <= start < end <= 1; predicted spans only need coordinates in [0, 1].
struct TimeSpan {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool valid_ground_truth() const { return 0.0 <= start && start < end && end <= 1.0; }
  bool operator==(const TimeSpan&) const = default;

  /// Throws ConfigError unless valid_ground_truth().
  static TimeSpan ground_truth(double start, double end);
};

/// Max-pool over time, [T, 2d] -> [2d].
template <typename T>
Tensor<T> pool_for_alignment(const Tensor<T>& encoded);

/// Max-margin alignment loss. video[i] and subtitle[i] come from the same
/// episode; every j != i gives a negative pair. For anchor video[i]:
///   mean_j max(0, tau - ||v_i - s_j|| + ||v_i - s_i||)
/// then averaged over anchors. Needs B >= 2 pooled [D] vectors per side.
template <typename T>
Tensor<T> modality_alignment_loss(const std::vector<Tensor<T>>& video,
                                  const std::vector<Tensor<T>>& subtitle, double margin);

/// Localization head: per active stream the five pooled vectors are
/// flattened to 50d, streams are averaged, and a linear map produces two
/// logits squashed by the logistic function. Returns [2] = (start, end).
template <typename T>
Tensor<T> predict_span(const std::vector<Tensor<T>>& pooled_per_stream,
                       const LinearParams<T>& head);

/// Length of the intersection of two intervals (0 when disjoint or when
/// either interval is empty/inverted).
double overlap_length(const TimeSpan& gt, const TimeSpan& pred);

struct LocalizationTerms {
  double regression = 0.0;  // ||gt - pred||_2 (or its square)
  double overlap = 0.0;     // overlap_length / gt.length(), in [0, 1]
  double total() const { return regression - overlap; }
};

LocalizationTerms localization_terms(const TimeSpan& gt, const TimeSpan& pred,
                                     RegForm form = RegForm::Norm);

/// Differentiable L_TL = L_reg - L_overlap on a predicted [2] span.
template <typename T>
Tensor<T> temporal_localization_loss(const TimeSpan& gt, const Tensor<T>& pred,
                                     RegForm form = RegForm::Norm);

}  // namespace mtvqa
