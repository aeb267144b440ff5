#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace stcl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(STCL_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

Backend initial_backend() {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("STCL_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::Scalar;
    if (want == "avx2" && avx2) return Backend::Avx2;
  }
  return avx2 ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::Scalar};
  if (cpu_has_avx2()) out.push_back(Backend::Avx2);
  return out;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !cpu_has_avx2()) throw std::invalid_argument("avx2 kernels unavailable on this CPU");
  current().store(b, std::memory_order_relaxed);
}

template <class T>
const Table<T>& table(Backend b) {
#if defined(STCL_HAVE_AVX2_KERNELS)
  if (b == Backend::Avx2) {
    if (!cpu_has_avx2()) throw std::invalid_argument("avx2 kernels unavailable on this CPU");
    return avx2_table<T>();
  }
#else
  if (b == Backend::Avx2) throw std::invalid_argument("avx2 kernels not compiled in");
#endif
  return scalar_table<T>();
}

template const Table<float>& table<float>(Backend);
template const Table<double>& table<double>(Backend);

namespace detail {
const Table<float>& active_float() { return table<float>(active_backend()); }
const Table<double>& active_double() { return table<double>(active_backend()); }
}  // namespace detail

}  // namespace stcl::kernels
