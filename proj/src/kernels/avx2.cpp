// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run unless dispatch confirmed CPU support.

#include "mtvqa/kernels.hpp"

#if defined(MTVQA_HAVE_AVX2)
#include <immintrin.h>

namespace mtvqa::kernels {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d hi64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, hi64));
  }
};

// c[0..n) += a0*b0 + a1*b1 + a2*b2 + a3*b3, four rank-1 updates per pass over c.
template <typename T>
inline void axpy4(std::size_t n, T a0, const T* b0, T a1, const T* b1, T a2, const T* b2, T a3,
                  const T* b3, T* c) {
  using V = Vec<T>;
  const auto v0 = V::set1(a0), v1 = V::set1(a1), v2 = V::set1(a2), v3 = V::set1(a3);
  std::size_t j = 0;
  for (; j + V::width <= n; j += V::width) {
    auto acc = V::load(c + j);
    acc = V::fma(v0, V::load(b0 + j), acc);
    acc = V::fma(v1, V::load(b1 + j), acc);
    acc = V::fma(v2, V::load(b2 + j), acc);
    acc = V::fma(v3, V::load(b3 + j), acc);
    V::store(c + j, acc);
  }
  for (; j < n; ++j) c[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
}

template <typename T>
inline void axpy1(std::size_t n, T a, const T* x, T* y) {
  using V = Vec<T>;
  const auto va = V::set1(a);
  std::size_t j = 0;
  for (; j + V::width <= n; j += V::width) V::store(y + j, V::fma(va, V::load(x + j), V::load(y + j)));
  for (; j < n; ++j) y[j] += a * x[j];
}

template <typename T>
void gemm_nn_avx2(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a = A + i * lda;
    T* c = C + i * ldc;
    std::size_t k = 0;
    for (; k + 4 <= K; k += 4)
      axpy4(N, a[k], B + k * ldb, a[k + 1], B + (k + 1) * ldb, a[k + 2], B + (k + 2) * ldb,
            a[k + 3], B + (k + 3) * ldb, c);
    for (; k < K; ++k) axpy1(N, a[k], B + k * ldb, c);
  }
}

template <typename T>
T dot_avx2(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  auto acc0 = V::zero(), acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::width <= n; i += 2 * V::width) {
    acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fma(V::load(x + i + V::width), V::load(y + i + V::width), acc1);
  }
  for (; i + V::width <= n; i += V::width) acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
  T s = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void gemm_nt_avx2(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a = A + i * lda;
    for (std::size_t j = 0; j < N; ++j) C[i * ldc + j] += dot_avx2(K, a, B + j * ldb);
  }
}

template <typename T>
void gemm_tn_avx2(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  std::size_t k = 0;
  for (; k + 4 <= K; k += 4) {
    const T* a0 = A + k * lda;
    const T* a1 = a0 + lda;
    const T* a2 = a1 + lda;
    const T* a3 = a2 + lda;
    const T* b0 = B + k * ldb;
    for (std::size_t i = 0; i < M; ++i)
      axpy4(N, a0[i], b0, a1[i], b0 + ldb, a2[i], b0 + 2 * ldb, a3[i], b0 + 3 * ldb, C + i * ldc);
  }
  for (; k < K; ++k) {
    const T* a = A + k * lda;
    const T* b = B + k * ldb;
    for (std::size_t i = 0; i < M; ++i) axpy1(N, a[i], b, C + i * ldc);
  }
}

template <typename T>
void axpy_avx2(std::size_t n, T a, const T* x, T* y) {
  axpy1(n, a, x, y);
}

template <typename T>
void mul_avx2(std::size_t n, const T* x, const T* y, T* out) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(out + i, V::mul(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void add_avx2(std::size_t n, const T* x, const T* y, T* out) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(out + i, V::add(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

}  // namespace

template <typename T>
const KernelTable<T>& avx2_table() noexcept {
  static const KernelTable<T> table{&gemm_nn_avx2<T>, &gemm_nt_avx2<T>, &gemm_tn_avx2<T>,
                                    &dot_avx2<T>,     &axpy_avx2<T>,    &mul_avx2<T>,
                                    &add_avx2<T>};
  return table;
}

template const KernelTable<float>& avx2_table<float>() noexcept;
template const KernelTable<double>& avx2_table<double>() noexcept;

}  // namespace mtvqa::kernels

#else

namespace mtvqa::kernels {

template <typename T>
const KernelTable<T>& avx2_table() noexcept {
  return scalar_table<T>();
}

template const KernelTable<float>& avx2_table<float>() noexcept;
template const KernelTable<double>& avx2_table<double>() noexcept;

}  // namespace mtvqa::kernels

#endif
