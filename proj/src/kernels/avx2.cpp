// Compiled with -mavx2 -mfma. Only reached after the dispatcher has checked
// CPU support.
#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace stcl::kernels {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t W = 8;
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V gt_mask(V a, V b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_ps(a, b); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t W = 4;
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V zero() { return _mm256_setzero_pd(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V max(V a, V b) { return _mm256_max_pd(a, b); }
  static V gt_mask(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_pd(a, b); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// Register tile: kRows rows of C by two vectors of columns. Every C entry is a
// single fma chain over p = 0..k-1, matching the scalar reference exactly.
template <class S, std::size_t kRows>
inline void gemm_tile2(std::size_t k, const typename S::T* a, std::size_t lda, const typename S::T* b,
                       std::size_t ldb, typename S::T* c, std::size_t ldc, bool accumulate) {
  typename S::V acc0[kRows];
  typename S::V acc1[kRows];
  for (std::size_t r = 0; r < kRows; ++r) {
    acc0[r] = accumulate ? S::load(c + r * ldc) : S::zero();
    acc1[r] = accumulate ? S::load(c + r * ldc + S::W) : S::zero();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = S::load(b + p * ldb);
    const auto b1 = S::load(b + p * ldb + S::W);
    for (std::size_t r = 0; r < kRows; ++r) {
      const auto av = S::set1(a[r * lda + p]);
      acc0[r] = S::fmadd(av, b0, acc0[r]);
      acc1[r] = S::fmadd(av, b1, acc1[r]);
    }
  }
  for (std::size_t r = 0; r < kRows; ++r) {
    S::store(c + r * ldc, acc0[r]);
    S::store(c + r * ldc + S::W, acc1[r]);
  }
}

template <class S, std::size_t kRows>
inline void gemm_tile1(std::size_t k, const typename S::T* a, std::size_t lda, const typename S::T* b,
                       std::size_t ldb, typename S::T* c, std::size_t ldc, bool accumulate) {
  typename S::V acc[kRows];
  for (std::size_t r = 0; r < kRows; ++r) acc[r] = accumulate ? S::load(c + r * ldc) : S::zero();
  for (std::size_t p = 0; p < k; ++p) {
    const auto bv = S::load(b + p * ldb);
    for (std::size_t r = 0; r < kRows; ++r) acc[r] = S::fmadd(S::set1(a[r * lda + p]), bv, acc[r]);
  }
  for (std::size_t r = 0; r < kRows; ++r) S::store(c + r * ldc, acc[r]);
}

template <class S, std::size_t kRows>
inline void gemm_rows(std::size_t n, std::size_t k, const typename S::T* a, std::size_t lda,
                      const typename S::T* b, std::size_t ldb, typename S::T* c, std::size_t ldc,
                      bool accumulate) {
  using T = typename S::T;
  std::size_t j = 0;
  for (; j + 2 * S::W <= n; j += 2 * S::W) gemm_tile2<S, kRows>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
  for (; j + S::W <= n; j += S::W) gemm_tile1<S, kRows>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < kRows; ++r) {
      T acc = accumulate ? c[r * ldc + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[r * lda + p], b[p * ldb + j], acc);
      c[r * ldc + j] = acc;
    }
  }
}

template <class S>
void gemm(std::size_t m, std::size_t n, std::size_t k, const typename S::T* a, std::size_t lda,
          const typename S::T* b, std::size_t ldb, typename S::T* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<S, 4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  for (; i < m; ++i) gemm_rows<S, 1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
}

template <class S>
void axpy(std::size_t n, typename S::T alpha, const typename S::T* x, typename S::T* y) {
  const auto av = S::set1(alpha);
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) S::store(y + i, S::fmadd(av, S::load(x + i), S::load(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <class S>
void axpby(std::size_t n, typename S::T alpha, const typename S::T* x, typename S::T beta, typename S::T* y) {
  const auto av = S::set1(alpha);
  const auto bv = S::set1(beta);
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) S::store(y + i, S::fmadd(av, S::load(x + i), S::mul(bv, S::load(y + i))));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], beta * y[i]);
}

template <class S>
void sgd_momentum(std::size_t n, typename S::T lr, typename S::T momentum, const typename S::T* g,
                  typename S::T* v, typename S::T* theta) {
  const auto mv = S::set1(momentum);
  const auto nlr = S::set1(-lr);
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) {
    const auto vel = S::fmadd(mv, S::load(v + i), S::load(g + i));
    S::store(v + i, vel);
    S::store(theta + i, S::fmadd(nlr, vel, S::load(theta + i)));
  }
  for (; i < n; ++i) {
    v[i] = std::fma(momentum, v[i], g[i]);
    theta[i] = std::fma(-lr, v[i], theta[i]);
  }
}

template <class S>
void relu(std::size_t n, const typename S::T* x, typename S::T* y) {
  using T = typename S::T;
  const auto z = S::zero();
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) S::store(y + i, S::max(S::load(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class S>
void relu_backward(std::size_t n, const typename S::T* pre, const typename S::T* dy, typename S::T* dx) {
  using T = typename S::T;
  const auto z = S::zero();
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) S::store(dx + i, S::and_(S::gt_mask(S::load(pre + i), z), S::load(dy + i)));
  for (; i < n; ++i) dx[i] = pre[i] > T(0) ? dy[i] : T(0);
}

template <class S>
void scale(std::size_t n, typename S::T s, typename S::T* y) {
  const auto sv = S::set1(s);
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) S::store(y + i, S::mul(sv, S::load(y + i)));
  for (; i < n; ++i) y[i] *= s;
}

template <class S>
typename S::T dot(std::size_t n, const typename S::T* a, const typename S::T* b) {
  auto acc0 = S::zero();
  auto acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * S::W <= n; i += 2 * S::W) {
    acc0 = S::fmadd(S::load(a + i), S::load(b + i), acc0);
    acc1 = S::fmadd(S::load(a + i + S::W), S::load(b + i + S::W), acc1);
  }
  for (; i + S::W <= n; i += S::W) acc0 = S::fmadd(S::load(a + i), S::load(b + i), acc0);
  typename S::T r = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) r = std::fma(a[i], b[i], r);
  return r;
}

template <class S>
typename S::T sum(std::size_t n, const typename S::T* x) {
  auto acc = S::zero();
  std::size_t i = 0;
  for (; i + S::W <= n; i += S::W) acc = S::add(acc, S::load(x + i));
  typename S::T r = S::hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

template <class S>
constexpr Table<typename S::T> make_table() {
  return Table<typename S::T>{&gemm<S>, &axpy<S>, &axpby<S>, &sgd_momentum<S>, &relu<S>,
                              &relu_backward<S>, &scale<S>, &dot<S>, &sum<S>};
}

constexpr Table<float> kFloat = make_table<F32>();
constexpr Table<double> kDouble = make_table<F64>();

}  // namespace

template <>
const Table<float>& avx2_table<float>() {
  return kFloat;
}
template <>
const Table<double>& avx2_table<double>() {
  return kDouble;
}

}  // namespace stcl::kernels
