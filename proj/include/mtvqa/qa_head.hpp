#pragma once

// Context-query attention, fusion, per-stream answer scoring and the QA loss.

#include <array>
#include <vector>

#include "mtvqa/encoders.hpp"
#include "mtvqa/tensor.hpp"

namespace mtvqa {

template <typename T>
struct Attention {
  Tensor<T> attended;      // A = Sbar Q, [n, 2d]
  Tensor<T> weights;       // Sbar, row-softmaxed C Q^T, [n, m]
};

/// Dot-product context-to-query attention.
template <typename T>
Attention<T> context_query_attention(const Tensor<T>& context, const Tensor<T>& query);

/// [H; Aq; Aa; H*Aq; H*Aa] along the feature axis: [n, 2d] x3 -> [n, 10d].
template <typename T>
Tensor<T> fuse(const Tensor<T>& h, const Tensor<T>& aq, const Tensor<T>& aa);

/// Second bi-LSTM plus the scalar head of one scoring stream.
template <typename T>
struct StreamHeadParams {
  BiLstmParams<T> lstm;     // input 10d, hidden 5d per direction
  LinearParams<T> score;    // [10d, 1]
};

template <typename T>
struct StreamOutput {
  Tensor<T> scores;   // [5] raw per-answer scores
  Tensor<T> pooled;   // [5, 10d] max-pooled vectors u^{a_i}
};

/// Runs the five fused matrices (same context length) through the stream's
/// bi-LSTM, max-pools over time and maps each pooled vector to a score.
template <typename T>
StreamOutput<T> score_stream(const std::vector<Tensor<T>>& fused_per_answer,
                             const StreamHeadParams<T>& head);

template <typename T>
struct StreamScores {
  Tensor<T> combined;  // [5] summed raw scores
  Tensor<T> probs;     // [5] softmax of combined
};

/// Sums the raw scores of every active stream and applies softmax. A single
/// entry is the uni-modal pass-through.
template <typename T>
StreamScores<T> combine_streams(const std::vector<Tensor<T>>& stream_scores);

inline constexpr double kProbClamp = 1e-7;

/// QA loss on answer probabilities [5] for the correct index. SummedBce:
/// -sum_i y_i log p_i + (1 - y_i) log(1 - p_i), i.e. each term of the sum
/// is a binary cross-entropy; Categorical: -log p_y. Probabilities are
/// clamped to [eps, 1 - eps] before the logs; clamped entries pass no
/// gradient.
template <typename T>
Tensor<T> qa_loss(const Tensor<T>& probs, int correct, LossForm form = LossForm::SummedBce);

/// Plain-double evaluation of the same formula (used for reporting).
double qa_loss_value(std::span<const double> probs, int correct, LossForm form);

}  // namespace mtvqa
