#pragma once

// Dense arithmetic kernels behind the encoder, the optimizer and the loss.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant picked at runtime. The variants vectorize across independent
// outputs and keep each output's accumulation order identical to the scalar
// loop, with fused multiply-adds on both sides, so the two backends agree
// bit for bit on everything except the explicit reductions (dot, sum).

#include <cstddef>
#include <string_view>
#include <vector>

namespace stcl::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);

template <class T>
struct Table {
  /// C[M x N] = (accumulate ? C : 0) + A[M x K] * B[K x N], row-major with
  /// leading dimensions. Each C entry accumulates over k in increasing order
  /// with fma.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
               std::size_t ldb, T* c, std::size_t ldc, bool accumulate);
  /// y[i] = fma(alpha, x[i], y[i])
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  /// y[i] = fma(alpha, x[i], beta * y[i])
  void (*axpby)(std::size_t n, T alpha, const T* x, T beta, T* y);
  /// Heavy-ball SGD: v = fma(momentum, v, g); theta = fma(-lr, v, theta)
  void (*sgd_momentum)(std::size_t n, T lr, T momentum, const T* g, T* v, T* theta);
  /// y = max(x, 0)
  void (*relu)(std::size_t n, const T* x, T* y);
  /// dx = pre > 0 ? dy : 0
  void (*relu_backward)(std::size_t n, const T* pre, const T* dy, T* dx);
  /// y[i] *= s
  void (*scale)(std::size_t n, T s, T* y);
  /// Reductions; lane-parallel in the SIMD variant, so only approximately
  /// equal across backends.
  T (*dot)(std::size_t n, const T* a, const T* b);
  T (*sum)(std::size_t n, const T* x);
};

template <class T>
const Table<T>& scalar_table();

/// Kernels of the active backend.
template <class T>
const Table<T>& table(Backend b);

template <class T>
inline const Table<T>& active();

/// Backends usable on this machine, scalar first.
std::vector<Backend> available_backends();

/// Backend currently returned by active(). Initialized on first use: the
/// best available one, unless STCL_KERNELS=scalar|avx2 says otherwise.
Backend active_backend();

/// Throws std::invalid_argument if `b` is unavailable on this CPU.
void set_backend(Backend b);

namespace detail {
const Table<float>& active_float();
const Table<double>& active_double();
}  // namespace detail

template <>
inline const Table<float>& active<float>() {
  return detail::active_float();
}
template <>
inline const Table<double>& active<double>() {
  return detail::active_double();
}

/// Copies `rows x cols` row-major `src` into `dst` as `cols x rows`.
template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kBlock = 16;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = r0 + kBlock < rows ? r0 + kBlock : rows;
      const std::size_t c1 = c0 + kBlock < cols ? c0 + kBlock : cols;
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

}  // namespace stcl::kernels
