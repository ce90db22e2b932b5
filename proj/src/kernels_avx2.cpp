// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma; only reachable
// through the dispatch table when the CPU reports both features.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "dpf/kernels.hpp"

namespace dpf::kernels {
namespace {

// exp(x) for 4 doubles. Cody-Waite reduction x = n*ln2 + r, |r| <= ln2/2,
// degree-13 Taylor polynomial on r, then scale by 2^n through the exponent
// bits. Inputs above kOverflow return inf, below kUnderflow return 0
// (subnormal results are flushed); NaN propagates.
inline __m256d exp4(__m256d x) {
  const __m256d kOverflow = _mm256_set1_pd(709.782712893384);
  const __m256d kUnderflow = _mm256_set1_pd(-708.3964185322641);
  const __m256d kLog2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d kLn2Hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d kLn2Lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d big = _mm256_cmp_pd(x, kOverflow, _CMP_GT_OQ);
  const __m256d small = _mm256_cmp_pd(x, kUnderflow, _CMP_LT_OQ);
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);

  // Clamp so the exponent-bit arithmetic below stays in range.
  __m256d xc = _mm256_max_pd(_mm256_min_pd(x, kOverflow), kUnderflow);

  const __m256d n = _mm256_round_pd(
      _mm256_mul_pd(xc, kLog2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, kLn2Hi, xc);
  r = _mm256_fnmadd_pd(n, kLn2Lo, r);

  // Taylor coefficients 1/k! down from k = 13.
  __m256d p = _mm256_set1_pd(1.6059043836821614599e-10);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868098979e-9));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441718775e-8));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985890653e-7));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985892510e-6));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587301566e-5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841253e-4));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889419e-3));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333332177e-3));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664354e-2));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666665741e-1));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0e-1));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // Scale by 2^n in two exact halves, 2^(n/2) * 2^(n - n/2), so each
  // factor's biased exponent stays inside [1, 2046] even at n = 1024.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m128i h32 = _mm_srai_epi32(n32, 1);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256i h64 = _mm256_cvtepi32_epi64(h32);
  const __m256i r64 = _mm256_sub_epi64(_mm256_cvtepi32_epi64(n32), h64);
  const __m256d s1 =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(h64, bias), 52));
  const __m256d s2 =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(r64, bias), 52));
  p = _mm256_mul_pd(_mm256_mul_pd(p, s1), s2);

  p = _mm256_blendv_pd(p, _mm256_setzero_pd(), small);
  p = _mm256_blendv_pd(
      p, _mm256_set1_pd(std::numeric_limits<double>::infinity()), big);
  p = _mm256_blendv_pd(p, x, nan_mask);
  return p;
}

inline double hadd4(__m256d v) {
  // Lane order matches left-to-right summation of the two 128-bit halves.
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

void vexp_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0, 0, 0, 0};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
    alignas(32) double res[4];
    _mm256_store_pd(res, exp4(_mm256_load_pd(buf)));
    for (std::size_t j = i; j < n; ++j) out[j] = res[j - i];
  }
}

void softmax_avx2(double* x, std::size_t n) {
  double mx = x[0];
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    std::size_t i = 4;
    for (; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    alignas(32) double m4[4];
    _mm256_store_pd(m4, vm);
    mx = m4[0];
    for (int j = 1; j < 4; ++j) mx = mx > m4[j] ? mx : m4[j];
    for (; i < n; ++i) mx = mx > x[i] ? mx : x[i];
  } else {
    for (std::size_t i = 1; i < n; ++i) mx = mx > x[i] ? mx : x[i];
  }

  const __m256d vmx = _mm256_set1_pd(mx);
  __m256d vsum = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), vmx));
    _mm256_storeu_pd(x + i, e);
    vsum = _mm256_add_pd(vsum, e);
  }
  double sum = hadd4(vsum);
  for (; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }

  const __m256d vinv = _mm256_set1_pd(1.0 / sum);
  i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vinv));
  for (; i < n; ++i) x[i] *= 1.0 / sum;
}

void shift_half_var_avx2(const double* mean, const double* log_sd, double* out,
                         std::size_t n) {
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d var = exp4(_mm256_mul_pd(two, _mm256_loadu_pd(log_sd + i)));
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(half, var, _mm256_loadu_pd(mean + i)));
  }
  for (; i < n; ++i) out[i] = mean[i] + 0.5 * std::exp(2.0 * log_sd[i]);
}

void exp_moment_avx2(const double* mean, const double* log_sd,
                     const double* extra, double* out, std::size_t n) {
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d var = exp4(_mm256_mul_pd(two, _mm256_loadu_pd(log_sd + i)));
    __m256d arg = _mm256_fmadd_pd(half, var, _mm256_loadu_pd(mean + i));
    if (extra) arg = _mm256_add_pd(arg, _mm256_loadu_pd(extra + i));
    _mm256_storeu_pd(out + i, exp4(arg));
  }
  for (; i < n; ++i) {
    double arg = mean[i] + 0.5 * std::exp(2.0 * log_sd[i]);
    if (extra) arg += extra[i];
    out[i] = std::exp(arg);
  }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  // Separate multiply and add: callers mix axpy output with the scalar
  // table's, so the rounding must match it bit for bit.
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                             _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hadd4(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double reduce_add_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hadd4(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const Table& avx2_table() {
  static const Table t{
      "avx2",          vexp_avx2, softmax_avx2, shift_half_var_avx2,
      exp_moment_avx2, axpy_avx2, dot_avx2,     reduce_add_avx2,
  };
  return t;
}

}  // namespace dpf::kernels

#endif  // x86_64
