#pragma once

// Token embedding, video feature projection and bi-directional LSTM
// encoding shared by every input stream.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtvqa/tensor.hpp"

namespace mtvqa {

enum class Stream { Subtitle, VideoImg, VideoCpt };

std::string to_string(Stream s);
Stream stream_from_string(const std::string& s);

/// Which QA loss formula to train with. SummedBce is the binary cross-entropy
/// summed over the five softmax outputs; Categorical is -log p[y].
enum class LossForm { SummedBce, Categorical };

/// Regression term of the localization loss: Euclidean norm or its square.
enum class RegForm { Norm, Squared };

struct ModelConfig {
  static constexpr int kNumAnswers = 5;

  int hidden_size = 32;         // d, per direction of the first-layer encoders
  int embed_dim = 16;           // word space width
  int video_feat_dim = 24;      // dense frame feature width
  int vocab_size = 0;           // 0 = take it from the dataset
  int second_lstm_hidden = 0;   // 0 = 5d, so the pooled vector is 10d wide
  double margin = 1.0;          // tau in the alignment hinge
  std::vector<Stream> streams{Stream::Subtitle, Stream::VideoCpt};
  LossForm loss_form = LossForm::SummedBce;
  RegForm reg_form = RegForm::Norm;
  bool span_head = true;        // instantiate the localization head

  int second_hidden() const { return second_lstm_hidden > 0 ? second_lstm_hidden : 5 * hidden_size; }
  int fused_width() const { return 10 * hidden_size; }
  int pooled_width() const { return 2 * second_hidden(); }
  bool has_stream(Stream s) const;
  std::vector<Stream> video_streams() const;

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

/// One LSTM direction. Gate blocks are (input, forget, cell, output).
template <typename T>
struct LstmParams {
  Tensor<T> w_input;   // [in, 4h]
  Tensor<T> w_hidden;  // [h, 4h]
  Tensor<T> bias;      // [4h], forget block initialised to 1
};

template <typename T>
struct BiLstmParams {
  LstmParams<T> forward;
  LstmParams<T> backward;
  std::size_t hidden() const { return forward.w_hidden.dim(0); }
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

/// Named parameter list in a fixed order; the order defines checkpoint layout.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

/// Draws parameters uniform in [-k, k]. Each parameter gets its own stream
/// seeded from (seed, name), so the set of other parameters never changes it.
class ParamInitializer {
 public:
  explicit ParamInitializer(std::uint64_t seed) : seed_(seed) {}

  template <typename T>
  Tensor<T> uniform(const std::string& name, Shape shape, double k) const;

  template <typename T>
  LstmParams<T> lstm(const std::string& name, std::size_t in_dim, std::size_t hidden) const;

  template <typename T>
  BiLstmParams<T> bilstm(const std::string& name, std::size_t in_dim, std::size_t hidden) const;

  template <typename T>
  LinearParams<T> linear(const std::string& name, std::size_t in_dim, std::size_t out_dim) const;

 private:
  std::uint64_t seed_;
};

template <typename T>
void append_params(std::vector<NamedParam<T>>& out, const std::string& name,
                   const BiLstmParams<T>& p);
template <typename T>
void append_params(std::vector<NamedParam<T>>& out, const std::string& name,
                   const LinearParams<T>& p);

/// Row lookup into the embedding table; [n, embed_dim], n may be 0.
template <typename T>
Tensor<T> embed_tokens(std::span<const std::int32_t> tokens, const Tensor<T>& table);

/// tanh(v W + b) row-wise; v is [T, video_feat_dim] with T >= 1.
template <typename T>
Tensor<T> project_video(const Tensor<T>& v, const LinearParams<T>& proj);

/// Forward and backward passes with zero initial state, concatenated per
/// step: [T, in] -> [T, 2h] (or [N, T, in] -> [N, T, 2h]).
template <typename T>
Tensor<T> bilstm_encode(const Tensor<T>& x, const BiLstmParams<T>& params);

/// x W + b for x of shape [..., in].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p);

}  // namespace mtvqa
