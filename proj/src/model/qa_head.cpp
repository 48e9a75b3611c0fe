#include "mtvqa/qa_head.hpp"

#include <algorithm>
#include <cmath>

#include "mtvqa/ops.hpp"

namespace mtvqa {

template <typename T>
Attention<T> context_query_attention(const Tensor<T>& context, const Tensor<T>& query) {
  if (context.rank() != 2 || query.rank() != 2)
    throw DimensionError("context_query_attention: expected rank-2 inputs, got " +
                         shape_str(context.shape()) + " and " + shape_str(query.shape()));
  if (context.dim(0) == 0) throw EmptySequenceError("context_query_attention: empty context");
  if (query.dim(0) == 0) throw EmptySequenceError("context_query_attention: empty query");
  auto weights = ops::softmax_rows(ops::matmul_nt(context, query));
  auto attended = ops::matmul(weights, query);
  return {attended, weights};
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& h, const Tensor<T>& aq, const Tensor<T>& aa) {
  if (h.shape() != aq.shape() || h.shape() != aa.shape())
    throw DimensionError("fuse: shapes " + shape_str(h.shape()) + ", " + shape_str(aq.shape()) +
                         ", " + shape_str(aa.shape()) + " must match");
  return ops::concat<T>({h, aq, aa, ops::mul(h, aq), ops::mul(h, aa)}, 1);
}

template <typename T>
StreamOutput<T> score_stream(const std::vector<Tensor<T>>& fused_per_answer,
                             const StreamHeadParams<T>& head) {
  if (fused_per_answer.size() != ModelConfig::kNumAnswers)
    throw DimensionError("score_stream: expected 5 fused matrices, got " +
                         std::to_string(fused_per_answer.size()));
  std::vector<Tensor<T>> stacked;
  stacked.reserve(fused_per_answer.size());
  for (const auto& m : fused_per_answer) {
    if (m.rank() != 2) throw DimensionError("score_stream: fused matrix must be [n, 10d], got " + shape_str(m.shape()));
    if (m.dim(0) == 0) throw EmptySequenceError("score_stream: empty fused matrix");
    stacked.push_back(ops::reshape(m, {1, m.dim(0), m.dim(1)}));
  }
  auto batch = ops::concat(stacked, 0);                 // [5, n, 10d]
  auto encoded = bilstm_encode(batch, head.lstm);       // [5, n, 2h]
  auto pooled = ops::maxpool_time(encoded);             // [5, 2h]
  auto scores = ops::reshape(linear(pooled, head.score), {ModelConfig::kNumAnswers});
  return {scores, pooled};
}

template <typename T>
StreamScores<T> combine_streams(const std::vector<Tensor<T>>& stream_scores) {
  if (stream_scores.empty()) throw ConfigError("combine_streams: no active stream");
  Tensor<T> combined = stream_scores.front();
  for (std::size_t i = 1; i < stream_scores.size(); ++i) combined = ops::add(combined, stream_scores[i]);
  auto probs = ops::reshape(ops::softmax_rows(ops::reshape(combined, {1, combined.numel()})),
                            {combined.numel()});
  return {combined, probs};
}

namespace {

template <typename T>
inline T clamp_prob(T p) {
  return std::clamp(p, T(kProbClamp), T(1.0 - kProbClamp));
}

}  // namespace

template <typename T>
Tensor<T> qa_loss(const Tensor<T>& probs, int correct, LossForm form) {
  const std::size_t n = probs.numel();
  if (correct < 0 || static_cast<std::size_t>(correct) >= n)
    throw IndexError("qa_loss: correct index " + std::to_string(correct) + " out of range");
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = clamp_prob(probs[i]);
    record_branch(p != probs[i]);
    const bool pos = static_cast<int>(i) == correct;
    if (form == LossForm::SummedBce)
      loss -= pos ? std::log(p) : std::log(T(1) - p);
    else if (pos)
      loss -= std::log(p);
  }
  auto* pp = probs.ptr().get();
  return make_result<T>("qa_loss", {1}, {loss}, {probs}, [pp, correct, form, n](TensorData<T>& o) {
    auto& g = pp->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const T raw = pp->values[i];
      if (raw < T(kProbClamp) || raw > T(1.0 - kProbClamp)) continue;
      const bool pos = static_cast<int>(i) == correct;
      if (pos)
        g[i] += -o.grad[0] / raw;
      else if (form == LossForm::SummedBce)
        g[i] += o.grad[0] / (T(1) - raw);
    }
  });
}

double qa_loss_value(std::span<const double> probs, int correct, LossForm form) {
  double loss = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    const bool pos = static_cast<int>(i) == correct;
    if (form == LossForm::SummedBce)
      loss -= pos ? std::log(p) : std::log(1.0 - p);
    else if (pos)
      loss -= std::log(p);
  }
  return loss;
}

#define MTVQA_INSTANTIATE_QA(T)                                                               \
  template Attention<T> context_query_attention(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template StreamOutput<T> score_stream(const std::vector<Tensor<T>>&,                        \
                                        const StreamHeadParams<T>&);                          \
  template StreamScores<T> combine_streams(const std::vector<Tensor<T>>&);                    \
  template Tensor<T> qa_loss(const Tensor<T>&, int, LossForm);

MTVQA_INSTANTIATE_QA(float)
MTVQA_INSTANTIATE_QA(double)

}  // namespace mtvqa
