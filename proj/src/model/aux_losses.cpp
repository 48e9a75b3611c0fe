#include "mtvqa/aux_losses.hpp"

#include <algorithm>
#include <cmath>

#include "mtvqa/ops.hpp"

namespace mtvqa {

TimeSpan TimeSpan::ground_truth(double start, double end) {
  TimeSpan s{start, end};
  if (!s.valid_ground_truth())
    throw ConfigError("invalid ground-truth span [" + std::to_string(start) + ", " +
                      std::to_string(end) + "]: need 0 <= start < end <= 1");
  return s;
}

template <typename T>
Tensor<T> pool_for_alignment(const Tensor<T>& encoded) {
  if (encoded.rank() != 2) throw DimensionError("pool_for_alignment: expected [T, 2d], got " + shape_str(encoded.shape()));
  return ops::maxpool_time(encoded);
}

template <typename T>
Tensor<T> modality_alignment_loss(const std::vector<Tensor<T>>& video,
                                  const std::vector<Tensor<T>>& subtitle, double margin) {
  const std::size_t B = video.size();
  if (subtitle.size() != B)
    throw DimensionError("modality_alignment_loss: " + std::to_string(B) + " video vs " +
                         std::to_string(subtitle.size()) + " subtitle vectors");
  if (B < 2) throw ConfigError("modality_alignment_loss: batch size must be >= 2, got " + std::to_string(B));
  const std::size_t D = video.front().numel();
  for (std::size_t i = 0; i < B; ++i)
    if (video[i].numel() != D || subtitle[i].numel() != D)
      throw DimensionError("modality_alignment_loss: pooled vectors must all have " +
                           std::to_string(D) + " entries");

  std::vector<T> dist(B * B);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < B; ++j) {
      T ss = 0;
      for (std::size_t k = 0; k < D; ++k) {
        const T d = video[i][k] - subtitle[j][k];
        ss += d * d;
      }
      dist[i * B + j] = std::sqrt(ss);
    }
  const T tau = static_cast<T>(margin);
  T total = 0;
  for (std::size_t i = 0; i < B; ++i) {
    T anchor = 0;
    for (std::size_t j = 0; j < B; ++j)
      if (j != i) {
        const T h = tau - dist[i * B + j] + dist[i * B + i];
        record_branch(h > T(0));
        anchor += std::max(T(0), h);
      }
    total += anchor / static_cast<T>(B - 1);
  }
  total /= static_cast<T>(B);

  std::vector<Tensor<T>> inputs(video);
  inputs.insert(inputs.end(), subtitle.begin(), subtitle.end());
  std::vector<TensorData<T>*> vp, sp;
  for (const auto& v : video) vp.push_back(v.ptr().get());
  for (const auto& s : subtitle) sp.push_back(s.ptr().get());

  return make_result<T>(
      "modality_alignment_loss", {1}, {total}, inputs,
      [vp = std::move(vp), sp = std::move(sp), dist = std::move(dist), tau, B, D](TensorData<T>& o) {
        const T c = o.grad[0] / static_cast<T>(B * (B - 1));
        // d(loss)/d(dist[i][j]) accumulated first, then pushed to vectors.
        std::vector<T> coef(B * B, T(0));
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < B; ++j)
            if (j != i && tau - dist[i * B + j] + dist[i * B + i] > T(0)) {
              coef[i * B + i] += c;
              coef[i * B + j] -= c;
            }
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < B; ++j) {
            const T w = coef[i * B + j];
            const T d = dist[i * B + j];
            if (w == T(0) || d == T(0)) continue;
            const T s = w / d;
            for (std::size_t k = 0; k < D; ++k) {
              const T diff = vp[i]->values[k] - sp[j]->values[k];
              if (vp[i]->requires_grad) vp[i]->grad_buffer()[k] += s * diff;
              if (sp[j]->requires_grad) sp[j]->grad_buffer()[k] -= s * diff;
            }
          }
      });
}

template <typename T>
Tensor<T> predict_span(const std::vector<Tensor<T>>& pooled_per_stream,
                       const LinearParams<T>& head) {
  if (pooled_per_stream.empty()) throw DimensionError("predict_span: no stream vectors");
  const std::size_t width = head.weight.dim(0);
  Tensor<T> acc;
  for (const auto& u : pooled_per_stream) {
    if (u.numel() != width)
      throw DimensionError("predict_span: pooled vectors " + shape_str(u.shape()) +
                           " do not flatten to head width " + std::to_string(width));
    auto flat = ops::reshape(u, {1, width});
    acc = acc.defined() ? ops::add(acc, flat) : flat;
  }
  if (pooled_per_stream.size() > 1)
    acc = ops::scale(acc, T(1) / static_cast<T>(pooled_per_stream.size()));
  return ops::reshape(ops::sigmoid(linear(acc, head)), {2});
}

double overlap_length(const TimeSpan& gt, const TimeSpan& pred) {
  return std::max(0.0, std::min(gt.end, pred.end) - std::max(gt.start, pred.start));
}

LocalizationTerms localization_terms(const TimeSpan& gt, const TimeSpan& pred, RegForm form) {
  const double ds = pred.start - gt.start;
  const double de = pred.end - gt.end;
  const double sq = ds * ds + de * de;
  LocalizationTerms t;
  t.regression = form == RegForm::Norm ? std::sqrt(sq) : sq;
  t.overlap = overlap_length(gt, pred) / gt.length();
  return t;
}

template <typename T>
Tensor<T> temporal_localization_loss(const TimeSpan& gt, const Tensor<T>& pred, RegForm form) {
  if (pred.numel() != 2) throw DimensionError("temporal_localization_loss: prediction must have 2 entries, got " + shape_str(pred.shape()));
  if (!gt.valid_ground_truth()) throw ConfigError("temporal_localization_loss: invalid ground-truth span");
  const TimeSpan p{static_cast<double>(pred[0]), static_cast<double>(pred[1])};
  const auto terms = localization_terms(gt, p, form);
  if (branch_tracking()) {
    record_branch(terms.overlap > 0);
    record_branch(p.end < gt.end);
    record_branch(p.start > gt.start);
    record_branch(terms.regression > 0);
  }
  auto* pp = pred.ptr().get();
  return make_result<T>(
      "temporal_localization_loss", {1}, {static_cast<T>(terms.total())}, {pred},
      [pp, gt, form, terms](TensorData<T>& o) {
        const double ps = pp->values[0], pe = pp->values[1];
        double gs = 0, ge = 0;
        if (form == RegForm::Norm) {
          if (terms.regression > 0) {
            gs = (ps - gt.start) / terms.regression;
            ge = (pe - gt.end) / terms.regression;
          }
        } else {
          gs = 2 * (ps - gt.start);
          ge = 2 * (pe - gt.end);
        }
        if (terms.overlap > 0) {
          const double inv = 1.0 / gt.length();
          if (pe < gt.end) ge -= inv;
          if (ps > gt.start) gs += inv;
        }
        auto& g = pp->grad_buffer();
        g[0] += o.grad[0] * static_cast<T>(gs);
        g[1] += o.grad[0] * static_cast<T>(ge);
      });
}

#define MTVQA_INSTANTIATE_AUX(T)                                                                  \
  template Tensor<T> pool_for_alignment(const Tensor<T>&);                                        \
  template Tensor<T> modality_alignment_loss(const std::vector<Tensor<T>>&,                       \
                                             const std::vector<Tensor<T>>&, double);              \
  template Tensor<T> predict_span(const std::vector<Tensor<T>>&, const LinearParams<T>&);         \
  template Tensor<T> temporal_localization_loss(const TimeSpan&, const Tensor<T>&, RegForm);

MTVQA_INSTANTIATE_AUX(float)
MTVQA_INSTANTIATE_AUX(double)

}  // namespace mtvqa
