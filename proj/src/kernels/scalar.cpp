// Scalar reference kernels. Summation order is fixed so results are
// reproducible; the AVX2 variants are checked against these.

#include "mtvqa/kernels.hpp"

namespace mtvqa::kernels {
namespace {

template <typename T>
void gemm_nn_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                 const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * ldc;
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[i * lda + k];
      const T* b = B + k * ldb;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

template <typename T>
void gemm_nt_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                 const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a = A + i * lda;
    for (std::size_t j = 0; j < N; ++j) {
      const T* b = B + j * ldb;
      T acc = 0;
      for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
      C[i * ldc + j] += acc;
    }
  }
}

template <typename T>
void gemm_tn_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                 const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t k = 0; k < K; ++k) {
    const T* a = A + k * lda;
    const T* b = B + k * ldb;
    for (std::size_t i = 0; i < M; ++i) {
      const T av = a[i];
      T* c = C + i * ldc;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

template <typename T>
T dot_ref(std::size_t n, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void axpy_ref(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void mul_ref(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void add_ref(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() noexcept {
  static const KernelTable<T> table{&gemm_nn_ref<T>, &gemm_nt_ref<T>, &gemm_tn_ref<T>,
                                    &dot_ref<T>,     &axpy_ref<T>,    &mul_ref<T>,
                                    &add_ref<T>};
  return table;
}

template const KernelTable<float>& scalar_table<float>() noexcept;
template const KernelTable<double>& scalar_table<double>() noexcept;

}  // namespace mtvqa::kernels
