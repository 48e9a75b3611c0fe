#pragma once

// Full multi-task network: encoders, per-stream QA scoring, localization
// head, and the batch objective combining the three task losses.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtvqa/aux_losses.hpp"
#include "mtvqa/encoders.hpp"
#include "mtvqa/qa_head.hpp"
#include "mtvqa/scheduler.hpp"
#include "mtvqa/synth_data.hpp"

namespace mtvqa {

template <typename T>
struct SampleOutput {
  StreamScores<T> scores;
  Tensor<T> span;                       // [2], undefined unless requested
  Tensor<T> pooled_subtitle;            // [2d]
  std::vector<Tensor<T>> pooled_video;  // [2d] per video stream (cpt first)
};

struct ForwardNeeds {
  bool span = true;
  bool alignment = true;
};

/// Scalar summaries of one batch; skipped terms are NaN.
struct BatchStats {
  double loss_qa = 0.0;
  double loss_ma = 0.0;
  double loss_tl = 0.0;
  double loss_total = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

template <typename T>
struct BatchObjective {
  Tensor<T> total;
  BatchStats stats;
};

template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// Every trainable tensor in checkpoint order.
  std::vector<NamedParam<T>> parameters() const;

  SampleOutput<T> forward(const EpisodeSample& s, ForwardNeeds needs = {}) const;

  /// alpha-weighted objective over a batch. Losses with weight exactly zero
  /// are not built; MA needs at least two samples.
  BatchObjective<T> batch_objective(std::span<const EpisodeSample* const> batch,
                                    const LossWeights& w) const;

  /// Index of the highest-probability answer (first on ties).
  static int predict(const StreamScores<T>& s);

  /// Copies parameter values by name from another model of the same shape.
  template <typename U>
  void copy_values_from(const Model<U>& other);

 private:
  Tensor<T> encode_text(std::span<const std::int32_t> tokens) const;

  ModelConfig cfg_;
  Tensor<T> embedding_;
  BiLstmParams<T> text_encoder_;
  std::optional<LinearParams<T>> video_proj_;
  std::optional<BiLstmParams<T>> img_encoder_;
  std::optional<BiLstmParams<T>> cpt_encoder_;
  std::array<std::optional<StreamHeadParams<T>>, 3> heads_;  // by Stream
  std::optional<LinearParams<T>> span_head_;
};

template <typename T>
template <typename U>
void Model<T>::copy_values_from(const Model<U>& other) {
  const auto src = other.parameters();
  auto dst = parameters();
  if (src.size() != dst.size()) throw LoadError("copy_values_from: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape())
      throw LoadError("copy_values_from: parameter " + dst[i].name + " does not match " + src[i].name);
    auto out = dst[i].tensor.mutable_values();
    auto in = src[i].tensor.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>(in[k]);
  }
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace mtvqa
