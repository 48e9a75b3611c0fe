#include "mtvqa/model.hpp"

#include <cmath>
#include <limits>

#include "mtvqa/ops.hpp"

namespace mtvqa {

namespace {

std::size_t slot(Stream s) { return static_cast<std::size_t>(s); }

std::string head_name(Stream s) { return "head." + to_string(s); }

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const ParamInitializer init(seed);
  const std::size_t d = cfg_.hidden_size;
  const std::size_t e = cfg_.embed_dim;
  embedding_ = init.uniform<T>("embedding", {static_cast<std::size_t>(cfg_.vocab_size), e}, 1.0);
  text_encoder_ = init.bilstm<T>("text_encoder", e, d);
  if (cfg_.has_stream(Stream::VideoImg)) {
    video_proj_ = init.linear<T>("video_proj", cfg_.video_feat_dim, e);
    img_encoder_ = init.bilstm<T>("img_encoder", e, d);
  }
  if (cfg_.has_stream(Stream::VideoCpt)) cpt_encoder_ = init.bilstm<T>("cpt_encoder", e, d);
  for (Stream s : cfg_.streams) {
    StreamHeadParams<T> h;
    h.lstm = init.bilstm<T>(head_name(s) + ".lstm", cfg_.fused_width(), cfg_.second_hidden());
    h.score = init.linear<T>(head_name(s) + ".score", cfg_.pooled_width(), 1);
    heads_[slot(s)] = std::move(h);
  }
  if (cfg_.span_head)
    span_head_ = init.linear<T>("span_head", static_cast<std::size_t>(ModelConfig::kNumAnswers) * cfg_.pooled_width(), 2);
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  out.push_back({"embedding", embedding_});
  append_params(out, "text_encoder", text_encoder_);
  if (video_proj_) append_params(out, "video_proj", *video_proj_);
  if (img_encoder_) append_params(out, "img_encoder", *img_encoder_);
  if (cpt_encoder_) append_params(out, "cpt_encoder", *cpt_encoder_);
  for (Stream s : {Stream::Subtitle, Stream::VideoImg, Stream::VideoCpt}) {
    const auto& h = heads_[slot(s)];
    if (!h) continue;
    append_params(out, head_name(s) + ".lstm", h->lstm);
    append_params(out, head_name(s) + ".score", h->score);
  }
  if (span_head_) append_params(out, "span_head", *span_head_);
  return out;
}

template <typename T>
Tensor<T> Model<T>::encode_text(std::span<const std::int32_t> tokens) const {
  return bilstm_encode(embed_tokens(tokens, embedding_), text_encoder_);
}

template <typename T>
SampleOutput<T> Model<T>::forward(const EpisodeSample& s, ForwardNeeds needs) const {
  if (s.video_features.empty() || s.subtitle_tokens.empty() || s.question_tokens.empty())
    throw EmptySequenceError("episode " + std::to_string(s.index) + " has an empty input sequence");
  if (video_proj_ && s.feat_dim != cfg_.video_feat_dim)
    throw DimensionError("episode frame width " + std::to_string(s.feat_dim) + " != model video_feat_dim " +
                         std::to_string(cfg_.video_feat_dim));

  const auto h_sub = encode_text(s.subtitle_tokens);
  const auto h_q = encode_text(s.question_tokens);
  std::vector<Tensor<T>> h_ans;
  for (const auto& a : s.answers) h_ans.push_back(encode_text(a));

  std::array<Tensor<T>, 3> ctx;
  if (heads_[slot(Stream::Subtitle)] || needs.alignment) ctx[slot(Stream::Subtitle)] = h_sub;
  if (cpt_encoder_)
    ctx[slot(Stream::VideoCpt)] = bilstm_encode(embed_tokens<T>(s.concept_tokens, embedding_), *cpt_encoder_);
  if (img_encoder_) {
    const auto frames = Tensor<T>::from(
        {s.num_frames(), static_cast<std::size_t>(s.feat_dim)},
        std::vector<T>(s.video_features.begin(), s.video_features.end()));
    ctx[slot(Stream::VideoImg)] = bilstm_encode(project_video(frames, *video_proj_), *img_encoder_);
  }

  SampleOutput<T> out;
  std::vector<Tensor<T>> stream_scores, stream_pooled;
  for (Stream st : {Stream::Subtitle, Stream::VideoImg, Stream::VideoCpt}) {
    const auto& head = heads_[slot(st)];
    if (!head) continue;
    const auto& h = ctx[slot(st)];
    const auto aq = context_query_attention(h, h_q).attended;
    std::vector<Tensor<T>> fused;
    for (const auto& ha : h_ans) fused.push_back(fuse(h, aq, context_query_attention(h, ha).attended));
    auto so = score_stream(fused, *head);
    stream_scores.push_back(so.scores);
    stream_pooled.push_back(so.pooled);
  }
  out.scores = combine_streams(stream_scores);
  if (needs.span && span_head_) out.span = predict_span(stream_pooled, *span_head_);
  if (needs.alignment) {
    out.pooled_subtitle = pool_for_alignment(h_sub);
    for (Stream st : cfg_.video_streams()) out.pooled_video.push_back(pool_for_alignment(ctx[slot(st)]));
  }
  return out;
}

template <typename T>
int Model<T>::predict(const StreamScores<T>& s) {
  int best = 0;
  for (int i = 1; i < ModelConfig::kNumAnswers; ++i)
    if (s.probs[i] > s.probs[best]) best = i;
  return best;
}

template <typename T>
BatchObjective<T> Model<T>::batch_objective(std::span<const EpisodeSample* const> batch,
                                            const LossWeights& w) const {
  w.validate();
  if (batch.empty()) throw ConfigError("batch_objective: empty batch");
  const bool use_ma = w.ma != 0.0;
  const bool use_tl = w.tl != 0.0;
  if (use_tl && !span_head_) throw ConfigError("TL loss has positive weight but the model has no span head");
  if (use_ma && cfg_.video_streams().empty())
    throw ConfigError("MA loss has positive weight but no video stream is active");
  if (use_ma && batch.size() < 2)
    throw ConfigError("MA loss needs a batch of at least 2, got " + std::to_string(batch.size()));

  const ForwardNeeds needs{use_tl, use_ma};
  const T inv_b = T(1) / static_cast<T>(batch.size());
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  BatchObjective<T> res;
  res.stats = {nan, nan, nan, nan, 0, batch.size()};
  std::vector<Tensor<T>> qa_terms, tl_terms, sub_pooled;
  std::vector<std::vector<Tensor<T>>> vid_pooled(cfg_.video_streams().size());
  for (const EpisodeSample* s : batch) {
    auto out = forward(*s, needs);
    if (predict(out.scores) == s->correct_index) ++res.stats.correct;
    if (w.qa != 0.0) qa_terms.push_back(qa_loss(out.scores.probs, s->correct_index, cfg_.loss_form));
    if (use_tl) tl_terms.push_back(temporal_localization_loss(s->gt_span, out.span, cfg_.reg_form));
    if (use_ma) {
      sub_pooled.push_back(out.pooled_subtitle);
      for (std::size_t k = 0; k < vid_pooled.size(); ++k) vid_pooled[k].push_back(out.pooled_video[k]);
    }
  }

  auto mean_of = [&](const std::vector<Tensor<T>>& terms) {
    Tensor<T> acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ops::add(acc, terms[i]);
    return ops::scale(acc, inv_b);
  };
  Tensor<T> qa, ma, tl;
  if (!qa_terms.empty()) {
    qa = mean_of(qa_terms);
    res.stats.loss_qa = static_cast<double>(qa.item());
  }
  if (use_tl) {
    tl = mean_of(tl_terms);
    res.stats.loss_tl = static_cast<double>(tl.item());
  }
  if (use_ma) {
    for (const auto& v : vid_pooled) {
      auto term = modality_alignment_loss(v, sub_pooled, cfg_.margin);
      ma = ma.defined() ? ops::add(ma, term) : term;
    }
    if (vid_pooled.size() > 1) ma = ops::scale(ma, T(1) / static_cast<T>(vid_pooled.size()));
    res.stats.loss_ma = static_cast<double>(ma.item());
  }
  res.total = total_loss(qa, ma, tl, w);
  res.stats.loss_total = static_cast<double>(res.total.item());
  return res;
}

template class Model<float>;
template class Model<double>;

}  // namespace mtvqa
