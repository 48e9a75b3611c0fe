#include "mtvqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtvqa/kernels.hpp"

namespace mtvqa::ops {
namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& a, std::size_t r) {
  if (a.rank() != r)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(a.shape()));
}

template <typename T>
inline T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<T> out(n * m, T(0));
  kernels::gemm_nn<T>(n, m, k, a.values().data(), k, b.values().data(), m, out.data(), m);
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("matmul", {n, m}, std::move(out), {a, b},
                        [pa, pb, n, k, m](TensorData<T>& o) {
                          if (pa->requires_grad)
                            kernels::gemm_nt<T>(n, k, m, o.grad.data(), m, pb->values.data(), m,
                                                pa->grad_buffer().data(), k);
                          if (pb->requires_grad)
                            kernels::gemm_tn<T>(k, m, n, pa->values.data(), k, o.grad.data(), m,
                                                pb->grad_buffer().data(), m);
                        });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul_nt", a, 2);
  require_rank("matmul_nt", b, 2);
  if (a.dim(1) != b.dim(1))
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  std::vector<T> out(n * m, T(0));
  kernels::gemm_nt<T>(n, m, k, a.values().data(), k, b.values().data(), k, out.data(), m);
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("matmul_nt", {n, m}, std::move(out), {a, b},
                        [pa, pb, n, k, m](TensorData<T>& o) {
                          if (pa->requires_grad)
                            kernels::gemm_nn<T>(n, k, m, o.grad.data(), m, pb->values.data(), k,
                                                pa->grad_buffer().data(), k);
                          if (pb->requires_grad)
                            kernels::gemm_tn<T>(m, k, n, o.grad.data(), m, pa->values.data(), k,
                                                pb->grad_buffer().data(), k);
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  kernels::add<T>(out.size(), a.values().data(), b.values().data(), out.data());
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [pa, pb](TensorData<T>& o) {
    if (pa->requires_grad) kernels::axpy<T>(o.grad.size(), T(1), o.grad.data(), pa->grad_buffer().data());
    if (pb->requires_grad) kernels::axpy<T>(o.grad.size(), T(1), o.grad.data(), pb->grad_buffer().data());
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [pa, pb](TensorData<T>& o) {
    if (pa->requires_grad) kernels::axpy<T>(o.grad.size(), T(1), o.grad.data(), pa->grad_buffer().data());
    if (pb->requires_grad) kernels::axpy<T>(o.grad.size(), T(-1), o.grad.data(), pb->grad_buffer().data());
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  kernels::mul<T>(out.size(), a.values().data(), b.values().data(), out.data());
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [pa, pb](TensorData<T>& o) {
    const std::size_t n = o.grad.size();
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * pb->values[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * pa->values[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  auto* px = x.ptr().get();
  return make_result<T>("scale", x.shape(), std::move(out), {x}, [px, s](TensorData<T>& o) {
    kernels::axpy<T>(o.grad.size(), s, o.grad.data(), px->grad_buffer().data());
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  auto* px = x.ptr().get();
  return make_result<T>("tanh", x.shape(), std::move(out), {x}, [px](TensorData<T>& o) {
    auto& g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * (T(1) - o.values[i] * o.values[i]);
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  auto* px = x.ptr().get();
  return make_result<T>("sigmoid", x.shape(), std::move(out), {x}, [px](TensorData<T>& o) {
    auto& g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * o.values[i] * (T(1) - o.values[i]);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  if (branch_tracking())
    for (std::size_t i = 0; i < out.size(); ++i) record_branch(x[i] > T(0));
  auto* px = x.ptr().get();
  return make_result<T>("relu", x.shape(), std::move(out), {x}, [px](TensorData<T>& o) {
    auto& g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (px->values[i] > T(0)) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> add_bias_rows(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() == 0 || b.rank() != 1 || x.shape().back() != b.dim(0))
    throw DimensionError("add_bias_rows: bias " + shape_str(b.shape()) +
                         " does not match last axis of " + shape_str(x.shape()));
  const std::size_t m = b.dim(0);
  const std::size_t rows = m ? x.numel() / m : 0;
  std::vector<T> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    kernels::add<T>(m, out.data() + r * m, b.values().data(), out.data() + r * m);
  auto* px = x.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("add_bias_rows", x.shape(), std::move(out), {x, b},
                        [px, pb, rows, m](TensorData<T>& o) {
                          if (px->requires_grad)
                            kernels::axpy<T>(o.grad.size(), T(1), o.grad.data(),
                                             px->grad_buffer().data());
                          if (pb->requires_grad) {
                            auto& g = pb->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              kernels::axpy<T>(m, T(1), o.grad.data() + r * m, g.data());
                          }
                        });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.rank() == 0 || x.shape().back() == 0)
    throw DimensionError("softmax_rows: empty row in " + shape_str(x.shape()));
  const std::size_t m = x.shape().back();
  const std::size_t rows = x.numel() / m;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.values().data() + r * m;
    T* y = out.data() + r * m;
    const T mx = *std::max_element(in, in + m);
    T total = 0;
    for (std::size_t j = 0; j < m; ++j) {
      y[j] = std::exp(in[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < m; ++j) y[j] /= total;
  }
  auto* px = x.ptr().get();
  return make_result<T>("softmax_rows", x.shape(), std::move(out), {x},
                        [px, rows, m](TensorData<T>& o) {
                          auto& g = px->grad_buffer();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T* y = o.values.data() + r * m;
                            const T* dy = o.grad.data() + r * m;
                            const T inner = kernels::dot<T>(m, y, dy);
                            for (std::size_t j = 0; j < m; ++j) g[r * m + j] += y[j] * (dy[j] - inner);
                          }
                        });
}

template <typename T>
Tensor<T> maxpool_time(const Tensor<T>& x) {
  if (x.rank() != 2 && x.rank() != 3)
    throw DimensionError("maxpool_time: expected [T,d] or [N,T,d], got " + shape_str(x.shape()));
  const bool batched = x.rank() == 3;
  const std::size_t N = batched ? x.dim(0) : 1;
  const std::size_t Tn = x.dim(batched ? 1 : 0);
  const std::size_t d = x.dim(batched ? 2 : 1);
  if (Tn == 0) throw EmptySequenceError("maxpool_time: empty time axis in " + shape_str(x.shape()));
  std::vector<T> out(N * d);
  std::vector<std::size_t> arg(N * d);
  const T* v = x.values().data();
  for (std::size_t n = 0; n < N; ++n) {
    const T* base = v + n * Tn * d;
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < Tn; ++t)
        if (base[t * d + j] > base[best * d + j]) best = t;
      out[n * d + j] = base[best * d + j];
      arg[n * d + j] = n * Tn * d + best * d + j;
    }
  }
  if (branch_tracking())
    for (auto a : arg) record_branch(a);
  Shape shape = batched ? Shape{N, d} : Shape{d};
  auto* px = x.ptr().get();
  return make_result<T>("maxpool_time", std::move(shape), std::move(out), {x},
                        [px, arg = std::move(arg)](TensorData<T>& o) {
                          auto& g = px->grad_buffer();
                          for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += o.grad[i];
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = xs.front().shape();
  if (axis >= first.size())
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& t : xs) {
    bool ok = t.rank() == first.size();
    for (std::size_t i = 0; ok && i < first.size(); ++i)
      if (i != axis && t.dim(i) != first[i]) ok = false;
    if (!ok)
      throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " +
                           shape_str(t.shape()) + " along axis " + std::to_string(axis));
    shape[axis] += t.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<std::size_t> chunk(xs.size());
  std::size_t row = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    chunk[k] = xs[k].dim(axis) * inner;
    row += chunk[k];
  }
  std::vector<T> out(outer * row);
  for (std::size_t o = 0, off = 0; o < outer; ++o)
    for (std::size_t k = 0; k < xs.size(); ++k) {
      std::copy_n(xs[k].values().data() + o * chunk[k], chunk[k], out.data() + off);
      off += chunk[k];
    }
  std::vector<TensorData<T>*> ins;
  for (const auto& t : xs) ins.push_back(t.ptr().get());
  return make_result<T>("concat", std::move(shape), std::move(out), xs,
                        [ins = std::move(ins), chunk = std::move(chunk), outer](TensorData<T>& o) {
                          std::size_t off = 0;
                          for (std::size_t r = 0; r < outer; ++r)
                            for (std::size_t k = 0; k < ins.size(); ++k) {
                              if (ins[k]->requires_grad)
                                kernels::axpy<T>(chunk[k], T(1), o.grad.data() + off,
                                                 ins[k]->grad_buffer().data() + r * chunk[k]);
                              off += chunk[k];
                            }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  std::vector<T> out(x.values().begin(), x.values().end());
  auto* px = x.ptr().get();
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [px](TensorData<T>& o) {
    kernels::axpy<T>(o.grad.size(), T(1), o.grad.data(), px->grad_buffer().data());
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.values()) s += v;
  auto* px = x.ptr().get();
  return make_result<T>("sum", {1}, {s}, {x}, [px](TensorData<T>& o) {
    auto& g = px->grad_buffer();
    for (auto& gi : g) gi += o.grad[0];
  });
}

template <typename T>
Tensor<T> l2_norm_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("l2_norm_diff", a, b);
  T ss = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const T d = a[i] - b[i];
    ss += d * d;
  }
  const T norm = std::sqrt(ss);
  auto* pa = a.ptr().get();
  auto* pb = b.ptr().get();
  return make_result<T>("l2_norm_diff", {1}, {norm}, {a, b}, [pa, pb](TensorData<T>& o) {
    const T norm = o.values[0];
    if (norm == T(0)) return;  // subgradient zero at coincident points
    const T s = o.grad[0] / norm;
    const std::size_t n = pa->values.size();
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += s * (pa->values[i] - pb->values[i]);
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] -= s * (pa->values[i] - pb->values[i]);
    }
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int32_t> ids) {
  require_rank("gather_rows", table, 2);
  const std::size_t V = table.dim(0), E = table.dim(1);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V)
      throw IndexError("token id " + std::to_string(ids[i]) + " out of range for vocabulary of " +
                       std::to_string(V));
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  std::vector<T> out(ids.size() * E);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(table.values().data() + rows[i] * E, E, out.data() + i * E);
  auto* pt = table.ptr().get();
  return make_result<T>("gather_rows", {ids.size(), E}, std::move(out), {table},
                        [pt, rows = std::move(rows), E](TensorData<T>& o) {
                          auto& g = pt->grad_buffer();
                          for (std::size_t i = 0; i < rows.size(); ++i)
                            kernels::axpy<T>(E, T(1), o.grad.data() + i * E, g.data() + rows[i] * E);
                        });
}

template <typename T>
Tensor<T> lstm(const Tensor<T>& x, const Tensor<T>& w_input, const Tensor<T>& w_hidden,
               const Tensor<T>& bias, bool reverse) {
  if (x.rank() != 2 && x.rank() != 3)
    throw DimensionError("lstm: input must be [T,in] or [N,T,in], got " + shape_str(x.shape()));
  const bool batched = x.rank() == 3;
  const std::size_t N = batched ? x.dim(0) : 1;
  const std::size_t Tn = x.dim(batched ? 1 : 0);
  const std::size_t in = x.dim(batched ? 2 : 1);
  if (Tn == 0) throw EmptySequenceError("lstm: empty sequence " + shape_str(x.shape()));
  require_rank("lstm", w_input, 2);
  require_rank("lstm", w_hidden, 2);
  require_rank("lstm", bias, 1);
  const std::size_t h = w_hidden.dim(0);
  const std::size_t G = 4 * h;
  if (w_input.dim(0) != in || w_input.dim(1) != G || w_hidden.dim(1) != G || bias.dim(0) != G)
    throw DimensionError("lstm: parameter shapes " + shape_str(w_input.shape()) + ", " +
                         shape_str(w_hidden.shape()) + ", " + shape_str(bias.shape()) +
                         " do not fit input " + shape_str(x.shape()));

  const std::size_t rows = N * Tn;
  // act holds pre-activations, then gate activations in place.
  std::vector<T> act(rows * G, T(0));
  kernels::gemm_nn<T>(rows, G, in, x.values().data(), in, w_input.values().data(), G, act.data(), G);
  for (std::size_t r = 0; r < rows; ++r)
    kernels::add<T>(G, act.data() + r * G, bias.values().data(), act.data() + r * G);
  std::vector<T> cell(rows * h), cell_tanh(rows * h), hidden(rows * h);

  const T* wh = w_hidden.values().data();
  for (std::size_t s = 0; s < Tn; ++s) {
    const std::size_t t = reverse ? Tn - 1 - s : s;
    const std::size_t tp = reverse ? t + 1 : t - 1;
    if (s > 0)
      kernels::gemm_nn<T>(N, G, h, hidden.data() + tp * h, Tn * h, wh, G, act.data() + t * G, Tn * G);
    for (std::size_t n = 0; n < N; ++n) {
      T* a = act.data() + (n * Tn + t) * G;
      const T* c_prev = s > 0 ? cell.data() + (n * Tn + tp) * h : nullptr;
      T* c = cell.data() + (n * Tn + t) * h;
      T* tc = cell_tanh.data() + (n * Tn + t) * h;
      T* hv = hidden.data() + (n * Tn + t) * h;
      for (std::size_t j = 0; j < h; ++j) {
        const T ig = sigmoid_scalar(a[j]);
        const T fg = sigmoid_scalar(a[h + j]);
        const T gg = std::tanh(a[2 * h + j]);
        const T og = sigmoid_scalar(a[3 * h + j]);
        a[j] = ig;
        a[h + j] = fg;
        a[2 * h + j] = gg;
        a[3 * h + j] = og;
        c[j] = (c_prev ? fg * c_prev[j] : T(0)) + ig * gg;
        tc[j] = std::tanh(c[j]);
        hv[j] = og * tc[j];
      }
    }
  }

  Shape shape = batched ? Shape{N, Tn, h} : Shape{Tn, h};
  std::vector<T> out = std::move(hidden);
  auto* px = x.ptr().get();
  auto* pwi = w_input.ptr().get();
  auto* pwh = w_hidden.ptr().get();
  auto* pb = bias.ptr().get();
  return make_result<T>(
      reverse ? "lstm_reverse" : "lstm", std::move(shape), std::move(out),
      {x, w_input, w_hidden, bias},
      [=, act = std::move(act), cell = std::move(cell), cell_tanh = std::move(cell_tanh)](
          TensorData<T>& o) {
        const T* hidden = o.values.data();
        std::vector<T> dpre(rows * G, T(0));
        std::vector<T> dh_next(N * h, T(0)), dc_next(N * h, T(0));
        // W^T once, so the per-step products run as row updates.
        std::vector<T> wh_t(G * h);
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t k = 0; k < G; ++k) wh_t[k * h + i] = pwh->values[i * G + k];
        for (std::size_t s = Tn; s-- > 0;) {
          const std::size_t t = reverse ? Tn - 1 - s : s;
          const std::size_t tp = reverse ? t + 1 : t - 1;
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t r = n * Tn + t;
            const T* a = act.data() + r * G;
            const T* tc = cell_tanh.data() + r * h;
            const T* c_prev = s > 0 ? cell.data() + (n * Tn + tp) * h : nullptr;
            const T* dout = o.grad.data() + r * h;
            T* dp = dpre.data() + r * G;
            T* dhn = dh_next.data() + n * h;
            T* dcn = dc_next.data() + n * h;
            for (std::size_t j = 0; j < h; ++j) {
              const T ig = a[j], fg = a[h + j], gg = a[2 * h + j], og = a[3 * h + j];
              const T dh = dout[j] + dhn[j];
              const T dc = dcn[j] + dh * og * (T(1) - tc[j] * tc[j]);
              dp[3 * h + j] = dh * tc[j] * og * (T(1) - og);
              dp[j] = dc * gg * ig * (T(1) - ig);
              dp[2 * h + j] = dc * ig * (T(1) - gg * gg);
              dp[h + j] = c_prev ? dc * c_prev[j] * fg * (T(1) - fg) : T(0);
              dcn[j] = dc * fg;
            }
          }
          std::fill(dh_next.begin(), dh_next.end(), T(0));
          if (s > 0)
            kernels::gemm_nn<T>(N, h, G, dpre.data() + t * G, Tn * G, wh_t.data(), h, dh_next.data(), h);
        }
        if (pwh->requires_grad && Tn > 1) {
          // Previous hidden state per row, zero at each sequence start.
          std::vector<T> prev(rows * h, T(0));
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t s = 1; s < Tn; ++s) {
              const std::size_t t = reverse ? Tn - 1 - s : s;
              const std::size_t tp = reverse ? t + 1 : t - 1;
              std::copy_n(hidden + (n * Tn + tp) * h, h, prev.data() + (n * Tn + t) * h);
            }
          kernels::gemm_tn<T>(h, G, rows, prev.data(), h, dpre.data(), G, pwh->grad_buffer().data(), G);
        }
        if (pwi->requires_grad)
          kernels::gemm_tn<T>(in, G, rows, px->values.data(), in, dpre.data(), G,
                              pwi->grad_buffer().data(), G);
        if (px->requires_grad) {
          std::vector<T> wi_t(G * in);
          for (std::size_t i = 0; i < in; ++i)
            for (std::size_t k = 0; k < G; ++k) wi_t[k * in + i] = pwi->values[i * G + k];
          kernels::gemm_nn<T>(rows, in, G, dpre.data(), G, wi_t.data(), in, px->grad_buffer().data(), in);
        }
        if (pb->requires_grad) {
          auto& g = pb->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) kernels::axpy<T>(G, T(1), dpre.data() + r * G, g.data());
        }
      });
}

#define MTVQA_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> add_bias_rows(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                             \
  template Tensor<T> maxpool_time(const Tensor<T>&);                                             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> l2_norm_diff(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int32_t>);               \
  template Tensor<T> lstm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                          bool);

MTVQA_INSTANTIATE_OPS(float)
MTVQA_INSTANTIATE_OPS(double)

}  // namespace mtvqa::ops
