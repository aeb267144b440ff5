#include <cmath>

#include "kernels_internal.hpp"

namespace stcl::kernels {
namespace {

template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <class T>
void axpby(std::size_t n, T alpha, const T* x, T beta, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], beta * y[i]);
}

template <class T>
void sgd_momentum(std::size_t n, T lr, T momentum, const T* g, T* v, T* theta) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::fma(momentum, v[i], g[i]);
    theta[i] = std::fma(-lr, v[i], theta[i]);
  }
}

template <class T>
void relu(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(std::size_t n, const T* pre, const T* dy, T* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = pre[i] > T(0) ? dy[i] : T(0);
}

template <class T>
void scale(std::size_t n, T s, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= s;
}

template <class T>
T dot(std::size_t n, const T* a, const T* b) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

template <class T>
T sum(std::size_t n, const T* x) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class T>
constexpr Table<T> make_table() {
  return Table<T>{&gemm<T>, &axpy<T>, &axpby<T>, &sgd_momentum<T>, &relu<T>,
                  &relu_backward<T>, &scale<T>, &dot<T>, &sum<T>};
}

constexpr Table<float> kFloat = make_table<float>();
constexpr Table<double> kDouble = make_table<double>();

}  // namespace

template <>
const Table<float>& scalar_table<float>() {
  return kFloat;
}
template <>
const Table<double>& scalar_table<double>() {
  return kDouble;
}

}  // namespace stcl::kernels
