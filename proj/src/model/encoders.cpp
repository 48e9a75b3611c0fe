#include "mtvqa/encoders.hpp"

#include <cmath>

#include "mtvqa/ops.hpp"
#include "mtvqa/rng.hpp"

namespace mtvqa {

std::string to_string(Stream s) {
  switch (s) {
    case Stream::Subtitle: return "subtitle";
    case Stream::VideoImg: return "img";
    case Stream::VideoCpt: return "cpt";
  }
  return "?";
}

Stream stream_from_string(const std::string& s) {
  if (s == "subtitle" || s == "sub") return Stream::Subtitle;
  if (s == "img" || s == "video-img") return Stream::VideoImg;
  if (s == "cpt" || s == "video-cpt") return Stream::VideoCpt;
  throw ConfigError("unknown stream '" + s + "' (expected subtitle, img or cpt)");
}

bool ModelConfig::has_stream(Stream s) const {
  for (auto x : streams)
    if (x == s) return true;
  return false;
}

std::vector<Stream> ModelConfig::video_streams() const {
  std::vector<Stream> v;
  for (auto s : {Stream::VideoCpt, Stream::VideoImg})
    if (has_stream(s)) v.push_back(s);
  return v;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be >= 1, got " + std::to_string(v));
  };
  positive(hidden_size, "hidden_size");
  positive(embed_dim, "embed_dim");
  positive(video_feat_dim, "video_feat_dim");
  positive(vocab_size, "vocab_size");
  if (second_lstm_hidden < 0) throw ConfigError("model.second_lstm_hidden must be >= 0");
  if (!(margin >= 0.0)) throw ConfigError("model.margin must be nonnegative");
  if (streams.empty()) throw ConfigError("model.streams must name at least one stream");
  for (std::size_t i = 0; i < streams.size(); ++i)
    for (std::size_t j = i + 1; j < streams.size(); ++j)
      if (streams[i] == streams[j]) throw ConfigError("model.streams lists '" + to_string(streams[i]) + "' twice");
}

template <typename T>
Tensor<T> ParamInitializer::uniform(const std::string& name, Shape shape, double k) const {
  Rng rng(derive_seed(seed_, name));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-k, k));
  return Tensor<T>::from(std::move(shape), std::move(v), true);
}

template <typename T>
LstmParams<T> ParamInitializer::lstm(const std::string& name, std::size_t in_dim,
                                     std::size_t hidden) const {
  const std::size_t G = 4 * hidden;
  LstmParams<T> p;
  p.w_input = uniform<T>(name + ".w_input", {in_dim, G}, 1.0 / std::sqrt(double(in_dim)));
  p.w_hidden = uniform<T>(name + ".w_hidden", {hidden, G}, 1.0 / std::sqrt(double(hidden)));
  p.bias = uniform<T>(name + ".bias", {G}, 1.0 / std::sqrt(double(hidden)));
  auto b = p.bias.mutable_values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = T(1);
  return p;
}

template <typename T>
BiLstmParams<T> ParamInitializer::bilstm(const std::string& name, std::size_t in_dim,
                                         std::size_t hidden) const {
  return {lstm<T>(name + ".fwd", in_dim, hidden), lstm<T>(name + ".bwd", in_dim, hidden)};
}

template <typename T>
LinearParams<T> ParamInitializer::linear(const std::string& name, std::size_t in_dim,
                                         std::size_t out_dim) const {
  const double k = 1.0 / std::sqrt(double(in_dim));
  return {uniform<T>(name + ".weight", {in_dim, out_dim}, k), uniform<T>(name + ".bias", {out_dim}, k)};
}

template <typename T>
void append_params(std::vector<NamedParam<T>>& out, const std::string& name,
                   const BiLstmParams<T>& p) {
  for (auto [dir, l] : {std::pair{".fwd", &p.forward}, std::pair{".bwd", &p.backward}}) {
    out.push_back({name + dir + ".w_input", l->w_input});
    out.push_back({name + dir + ".w_hidden", l->w_hidden});
    out.push_back({name + dir + ".bias", l->bias});
  }
}

template <typename T>
void append_params(std::vector<NamedParam<T>>& out, const std::string& name,
                   const LinearParams<T>& p) {
  out.push_back({name + ".weight", p.weight});
  out.push_back({name + ".bias", p.bias});
}

template <typename T>
Tensor<T> embed_tokens(std::span<const std::int32_t> tokens, const Tensor<T>& table) {
  return ops::gather_rows(table, tokens);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  const std::size_t in = p.weight.dim(0);
  if (x.rank() == 0 || x.shape().back() != in)
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(p.weight.shape()));
  if (x.rank() == 2) return ops::add_bias_rows(ops::matmul(x, p.weight), p.bias);
  Shape out_shape = x.shape();
  out_shape.back() = p.weight.dim(1);
  auto flat = ops::reshape(x, {x.numel() / in, in});
  return ops::reshape(ops::add_bias_rows(ops::matmul(flat, p.weight), p.bias), std::move(out_shape));
}

template <typename T>
Tensor<T> project_video(const Tensor<T>& v, const LinearParams<T>& proj) {
  if (v.rank() != 2) throw DimensionError("project_video: expected [T, feat], got " + shape_str(v.shape()));
  if (v.dim(0) == 0) throw EmptySequenceError("project_video: empty frame sequence");
  return ops::tanh(linear(v, proj));
}

template <typename T>
Tensor<T> bilstm_encode(const Tensor<T>& x, const BiLstmParams<T>& params) {
  auto fwd = ops::lstm(x, params.forward.w_input, params.forward.w_hidden, params.forward.bias, false);
  auto bwd = ops::lstm(x, params.backward.w_input, params.backward.w_hidden, params.backward.bias, true);
  return ops::concat<T>({fwd, bwd}, x.rank() - 1);
}

#define MTVQA_INSTANTIATE_ENCODERS(T)                                                             \
  template Tensor<T> ParamInitializer::uniform<T>(const std::string&, Shape, double) const;       \
  template LstmParams<T> ParamInitializer::lstm<T>(const std::string&, std::size_t, std::size_t) \
      const;                                                                                      \
  template BiLstmParams<T> ParamInitializer::bilstm<T>(const std::string&, std::size_t,           \
                                                       std::size_t) const;                        \
  template LinearParams<T> ParamInitializer::linear<T>(const std::string&, std::size_t,           \
                                                       std::size_t) const;                        \
  template void append_params(std::vector<NamedParam<T>>&, const std::string&,                    \
                              const BiLstmParams<T>&);                                            \
  template void append_params(std::vector<NamedParam<T>>&, const std::string&,                    \
                              const LinearParams<T>&);                                            \
  template Tensor<T> embed_tokens(std::span<const std::int32_t>, const Tensor<T>&);               \
  template Tensor<T> linear(const Tensor<T>&, const LinearParams<T>&);                            \
  template Tensor<T> project_video(const Tensor<T>&, const LinearParams<T>&);                     \
  template Tensor<T> bilstm_encode(const Tensor<T>&, const BiLstmParams<T>&);

MTVQA_INSTANTIATE_ENCODERS(float)
MTVQA_INSTANTIATE_ENCODERS(double)

}  // namespace mtvqa
