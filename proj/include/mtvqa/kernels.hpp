#pragma once

// Dense inner-loop kernels used by the tensor engine.
//
// Every kernel has a scalar reference implementation and, where the CPU
// supports it, an AVX2+FMA variant. The active backend is chosen once at
// startup from CPUID and can be overridden (tests pin both to compare them).
// All matrices are row-major with explicit leading dimensions. The gemm
// family accumulates into C.

#include <cstddef>
#include <string_view>

namespace mtvqa::kernels {

enum class Backend { Scalar, Avx2 };

/// Backend used by all dispatching entry points below.
Backend active_backend() noexcept;

/// True if this CPU and build can run the AVX2 variants.
bool avx2_available() noexcept;

/// Forces a backend. Requesting Avx2 on a CPU without it throws.
void set_backend(Backend b);

/// Restores CPUID-based selection.
void reset_backend() noexcept;

std::string_view backend_name(Backend b) noexcept;

template <typename T>
struct KernelTable {
  // C[M,N] += A[M,K] * B[K,N]
  void (*gemm_nn)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc);
  // C[M,N] += A[M,K] * B[N,K]^T
  void (*gemm_nt)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc);
  // C[M,N] += A[K,M]^T * B[K,N]
  void (*gemm_tn)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  // out = x * y (elementwise)
  void (*mul)(std::size_t n, const T* x, const T* y, T* out);
  // out = x + y
  void (*add)(std::size_t n, const T* x, const T* y, T* out);
};

template <typename T>
const KernelTable<T>& scalar_table() noexcept;

// Only meaningful when avx2_available(); returns the scalar table otherwise.
template <typename T>
const KernelTable<T>& avx2_table() noexcept;

template <typename T>
const KernelTable<T>& table_for(Backend b) noexcept;

template <typename T>
inline const KernelTable<T>& active() noexcept {
  return table_for<T>(active_backend());
}

// Convenience wrappers over the active table.
template <typename T>
inline void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                    const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  active<T>().gemm_nn(M, N, K, A, lda, B, ldb, C, ldc);
}
template <typename T>
inline void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                    const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  active<T>().gemm_nt(M, N, K, A, lda, B, ldb, C, ldc);
}
template <typename T>
inline void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                    const T* B, std::size_t ldb, T* C, std::size_t ldc) {
  active<T>().gemm_tn(M, N, K, A, lda, B, ldb, C, ldc);
}
template <typename T>
inline T dot(std::size_t n, const T* x, const T* y) {
  return active<T>().dot(n, x, y);
}
template <typename T>
inline void axpy(std::size_t n, T a, const T* x, T* y) {
  active<T>().axpy(n, a, x, y);
}
template <typename T>
inline void mul(std::size_t n, const T* x, const T* y, T* out) {
  active<T>().mul(n, x, y, out);
}
template <typename T>
inline void add(std::size_t n, const T* x, const T* y, T* out) {
  active<T>().add(n, x, y, out);
}

}  // namespace mtvqa::kernels
