// AVX2 backends for the numeric kernels.  This translation unit is the only
// one compiled with -mavx2; everything here is reached solely through the
// runtime dispatch in kernels.cpp after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "ares/kernels.hpp"

namespace ares::kernels::detail {

namespace {

// Vectorized e^x for four doubles, a port of the classic Cephes expansion:
// reduce x = n*ln2 + r with |r| <= ln2/2, evaluate the rational
// 1 + 2*r*P(r^2) / (Q(r^2) - r*P(r^2)), then scale by 2^n through the
// exponent bits.  Accurate to ~1 ulp over the clamped range, which is far
// tighter than the equivalence tolerance the scalar/AVX2 tests enforce.
// Deliberately FMA-free so AVX2 support alone is sufficient.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.437);
  const __m256d lo = _mm256_set1_pd(-709.436139303);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

  x = _mm256_min_pd(x, hi);
  x = _mm256_max_pd(x, lo);

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, ln2_hi));
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, ln2_lo));

  __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_add_pd(_mm256_mul_pd(p0, xx), p1);
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), p2);
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_add_pd(_mm256_mul_pd(q0, xx), q1);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), q2);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), q3);

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_add_pd(_mm256_add_pd(e, e), _mm256_set1_pd(1.0));

  // 2^n via the exponent field; n is integral and within [-1023, 1024).
  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
}

}  // namespace

void avx2_exp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

double avx2_reduce_max(const double* x, std::size_t n) {
  if (n < 4) return scalar_reduce_max(x, n);
  __m256d acc = _mm256_loadu_pd(x);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  }
  double m = hmax(acc);
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double avx2_reduce_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double avx2_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void avx2_add_scalar(const double* x, double c, double* out, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), vc));
  }
  for (; i < n; ++i) out[i] = x[i] + c;
}

void avx2_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double avx2_weighted_log_diff(const double* p, const double* lp,
                              const double* lq, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d diff =
        _mm256_sub_pd(_mm256_loadu_pd(lp + i), _mm256_loadu_pd(lq + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(p + i), diff));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += p[i] * (lp[i] - lq[i]);
  return s;
}

void avx2_softmax(const double* x, double* out, std::size_t n) {
  if (n == 0) return;
  const double m = avx2_reduce_max(x, n);
  const __m256d vm = _mm256_set1_pd(m);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vm));
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  const __m256d vs = _mm256_set1_pd(s);
  i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(out + i), vs));
  }
  for (; i < n; ++i) out[i] /= s;
}

void avx2_log_softmax(const double* x, double* out, std::size_t n) {
  if (n == 0) return;
  const double m = avx2_reduce_max(x, n);
  const __m256d vm = _mm256_set1_pd(m);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vm)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::exp(x[i] - m);
  const double lse = m + std::log(s);
  avx2_add_scalar(x, -lse, out, n);
}

}  // namespace ares::kernels::detail
