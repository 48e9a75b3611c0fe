#include <atomic>
#include <stdexcept>

#include "mtvqa/kernels.hpp"

namespace mtvqa::kernels {
namespace {

bool detect_avx2() noexcept {
#if defined(MTVQA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detected() noexcept {
  static const Backend b = detect_avx2() ? Backend::Avx2 : Backend::Scalar;
  return b;
}

std::atomic<int> forced{-1};

}  // namespace

bool avx2_available() noexcept { return detected() == Backend::Avx2; }

Backend active_backend() noexcept {
  const int f = forced.load(std::memory_order_relaxed);
  return f < 0 ? detected() : static_cast<Backend>(f);
}

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available())
    throw std::runtime_error("AVX2 kernels requested but not supported on this CPU/build");
  forced.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() noexcept { forced.store(-1, std::memory_order_relaxed); }

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

template <typename T>
const KernelTable<T>& table_for(Backend b) noexcept {
  return b == Backend::Avx2 ? avx2_table<T>() : scalar_table<T>();
}

template const KernelTable<float>& table_for<float>(Backend) noexcept;
template const KernelTable<double>& table_for<double>(Backend) noexcept;

}  // namespace mtvqa::kernels
