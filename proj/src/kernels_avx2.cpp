// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA variants of the arithmetic kernels. Transcendental maps use
// polynomial evaluations in the vector lanes (Cody-Waite argument reduction
// for exp, atanh-series mantissa expansion for log); loop remainders are
// routed through the same vector code on a padded block so every element
// sees an identical instruction sequence regardless of its position.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "rtdnet/kernels.hpp"

namespace rtdnet::kernels {

namespace avx2 {

namespace {

inline __m256d load(const double* p) { return _mm256_loadu_pd(p); }
inline void store(double* p, __m256d v) { _mm256_storeu_pd(p, v); }

// 2^n for integer lane values n in [-1075, 1025], split into two factors so
// intermediate exponents stay in normal range and denormal results are exact.
inline __m256d pow2_from_epi64(__m256i n) {
  const __m256i bias = _mm256_set1_epi64x(1023);
  return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n, bias), 52));
}

constexpr double kExpHi = 709.782712893383996;   // above: saturate
constexpr double kExpLo = -745.133219101941108;  // below: underflow to 0
constexpr double kLog2E = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;

inline __m256d exp4(__m256d x) {
  x = _mm256_min_pd(x, _mm256_set1_pd(kExpHi));
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpLo));

  const __m256d nr = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nr, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(nr, _mm256_set1_pd(kLn2Lo), r);

  // exp(r) on [-ln2/2, ln2/2] by a degree-13 Taylor expansion.
  const double coef[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(coef[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(coef[i]));

  // Split n into halves; each 2^h factor keeps its biased exponent in range
  // even for results down in the denormals.
  const __m128i n32 = _mm256_cvtpd_epi32(nr);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i half = _mm256_cvtepi32_epi64(_mm_srai_epi32(n32, 1));
  const __m256i rest = _mm256_sub_epi64(n64, half);
  p = _mm256_mul_pd(p, pow2_from_epi64(half));
  p = _mm256_mul_pd(p, pow2_from_epi64(rest));
  return p;
}

constexpr double kSqrtHalf = 0.70710678118654752440;

// log(x) for positive finite lanes. Pad lanes must be > 0.
inline __m256d log4(__m256d x) {
  // Pre-scale denormals so exponent extraction is valid.
  const __m256d tiny = _mm256_set1_pd(2.2250738585072014e-308);
  const __m256d denorm = _mm256_cmp_pd(x, tiny, _CMP_LT_OQ);
  const __m256d scaled = _mm256_mul_pd(x, _mm256_set1_pd(0x1.0p54));
  x = _mm256_blendv_pd(x, scaled, denorm);
  const __m256d ebias =
      _mm256_blendv_pd(_mm256_setzero_pd(), _mm256_set1_pd(-54.0), denorm);

  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i raw_e =
      _mm256_and_si256(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(0x7ff));
  // Exact int64 -> double for small non-negative values via the 2^52 trick.
  const __m256d magic = _mm256_set1_pd(0x1.0p52);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(raw_e, _mm256_castpd_si256(magic))), magic);
  e = _mm256_add_pd(_mm256_sub_pd(e, _mm256_set1_pd(1022.0)), ebias);

  const __m256i mant_mask = _mm256_set1_epi64x(0x000fffffffffffffLL);
  const __m256i half_bits = _mm256_set1_epi64x(0x3fe0000000000000LL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), half_bits));  // [0.5, 1)

  const __m256d low = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrtHalf), _CMP_LT_OQ);
  m = _mm256_blendv_pd(m, _mm256_add_pd(m, m), low);
  e = _mm256_sub_pd(e, _mm256_and_pd(low, _mm256_set1_pd(1.0)));

  // ln m = 2 atanh(s), s = (m-1)/(m+1), |s| <= 0.1716.
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d u = _mm256_mul_pd(s, s);
  const double inv_odd[] = {1.0 / 19.0, 1.0 / 17.0, 1.0 / 15.0, 1.0 / 13.0, 1.0 / 11.0,
                            1.0 / 9.0,  1.0 / 7.0,  1.0 / 5.0,  1.0 / 3.0,  1.0};
  __m256d w = _mm256_set1_pd(inv_odd[0]);
  for (int i = 1; i < 10; ++i) w = _mm256_fmadd_pd(w, u, _mm256_set1_pd(inv_odd[i]));
  const __m256d lnm = _mm256_mul_pd(_mm256_add_pd(s, s), w);

  __m256d out = _mm256_mul_pd(e, _mm256_set1_pd(kLn2Hi));
  out = _mm256_add_pd(out, _mm256_fmadd_pd(e, _mm256_set1_pd(kLn2Lo), lnm));
  return out;
}

// log1p(z) for z in (0, 1]: short series below 0.01, log(1+z) above.
inline __m256d log1p4_unit(__m256d z) {
  const __m256d one = _mm256_set1_pd(1.0);
  const double c[] = {1.0 / 7.0, -1.0 / 6.0, 1.0 / 5.0, -1.0 / 4.0,
                      1.0 / 3.0, -1.0 / 2.0, 1.0};
  __m256d p = _mm256_set1_pd(c[0]);
  for (int i = 1; i < 7; ++i) p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[i]));
  const __m256d series = _mm256_mul_pd(z, p);
  const __m256d big = log4(_mm256_add_pd(one, z));
  const __m256d use_big = _mm256_cmp_pd(z, _mm256_set1_pd(0.01), _CMP_GT_OQ);
  return _mm256_blendv_pd(series, big, use_big);
}

inline __m256d abs4(__m256d x) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
}

inline __m256d tanh4(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ax = abs4(x);
  const __m256d t = exp4(_mm256_mul_pd(ax, _mm256_set1_pd(-2.0)));
  const __m256d r = _mm256_div_pd(_mm256_sub_pd(one, t), _mm256_add_pd(one, t));
  // Copy the sign of x back onto r.
  const __m256d sign = _mm256_and_pd(x, _mm256_set1_pd(-0.0));
  return _mm256_or_pd(r, sign);
}

inline __m256d softplus4(__m256d x) {
  const __m256d z = exp4(_mm256_sub_pd(_mm256_setzero_pd(), abs4(x)));
  const __m256d l = log1p4_unit(z);
  return _mm256_add_pd(_mm256_max_pd(x, _mm256_setzero_pd()), l);
}

inline __m256d sigmoid4(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d t = exp4(_mm256_sub_pd(_mm256_setzero_pd(), abs4(x)));
  const __m256d denom = _mm256_add_pd(one, t);
  const __m256d pos = _mm256_div_pd(one, denom);
  const __m256d neg = _mm256_div_pd(t, denom);
  const __m256d is_neg = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
  return _mm256_blendv_pd(pos, neg, is_neg);
}

using MapFn = __m256d (*)(__m256d);

// Applies F lane-wise; the tail goes through the same vector code on a
// padded block (pad value 1.0 keeps every map in its domain).
template <MapFn F>
void map_padded(int n, const double* x, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, F(load(x + i)));
  if (i < n) {
    alignas(32) double tmp[4] = {1.0, 1.0, 1.0, 1.0};
    std::memcpy(tmp, x + i, sizeof(double) * static_cast<size_t>(n - i));
    const __m256d r = F(_mm256_load_pd(tmp));
    _mm256_store_pd(tmp, r);
    std::memcpy(y + i, tmp, sizeof(double) * static_cast<size_t>(n - i));
  }
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

void gemm_nn(int m, int k, int n, const double* a, const double* b, double* c) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<size_t>(i) * n;
    const double* ai = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const __m256d av = _mm256_set1_pd(ai[kk]);
      const double* bk = b + static_cast<size_t>(kk) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4)
        store(ci + j, _mm256_fmadd_pd(av, load(bk + j), load(ci + j)));
      for (; j < n; ++j) ci[j] += ai[kk] * bk[j];
    }
  }
}

void gemm_nt_acc(int m, int k, int n, const double* g, const double* b, double* da) {
  for (int i = 0; i < m; ++i) {
    const double* gi = g + static_cast<size_t>(i) * n;
    double* dai = da + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* bk = b + static_cast<size_t>(kk) * n;
      __m256d acc = _mm256_setzero_pd();
      int j = 0;
      for (; j + 4 <= n; j += 4) acc = _mm256_fmadd_pd(load(gi + j), load(bk + j), acc);
      double s = hsum(acc);
      for (; j < n; ++j) s += gi[j] * bk[j];
      dai[kk] += s;
    }
  }
}

void gemm_tn_acc(int m, int k, int n, const double* a, const double* g, double* db) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    const double* gi = g + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const __m256d av = _mm256_set1_pd(ai[kk]);
      double* dbk = db + static_cast<size_t>(kk) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4)
        store(dbk + j, _mm256_fmadd_pd(av, load(gi + j), load(dbk + j)));
      for (; j < n; ++j) dbk[j] += ai[kk] * gi[j];
    }
  }
}

double dot(int n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(load(x + i), load(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(int n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, load(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void axpy(int n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, _mm256_fmadd_pd(av, load(x + i), load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vmadd(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    store(y + i, _mm256_fmadd_pd(load(a + i), load(b + i), load(y + i)));
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

void vadd(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, _mm256_add_pd(load(a + i), load(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void vsub(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, _mm256_sub_pd(load(a + i), load(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void vmul(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, _mm256_mul_pd(load(a + i), load(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void vscale(int n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) store(y + i, _mm256_mul_pd(av, load(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void vexp(int n, const double* x, double* y) { map_padded<exp4>(n, x, y); }
void vlog(int n, const double* x, double* y) { map_padded<log4>(n, x, y); }
void vtanh(int n, const double* x, double* y) { map_padded<tanh4>(n, x, y); }
void vsoftplus(int n, const double* x, double* y) { map_padded<softplus4>(n, x, y); }
void vsigmoid(int n, const double* x, double* y) { map_padded<sigmoid4>(n, x, y); }

void tanh_bwd(int n, const double* y, const double* g, double* dx) {
  const __m256d one = _mm256_set1_pd(1.0);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = load(y + i);
    const __m256d d = _mm256_fnmadd_pd(yv, yv, one);
    store(dx + i, _mm256_fmadd_pd(load(g + i), d, load(dx + i)));
  }
  for (; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
}

void softplus_bwd(int n, const double* x, const double* g, double* dx) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = sigmoid4(load(x + i));
    store(dx + i, _mm256_fmadd_pd(load(g + i), s, load(dx + i)));
  }
  for (; i < n; ++i) {
    const double xv = x[i];
    const double e = std::exp(-std::fabs(xv));
    const double s = xv >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    dx[i] += g[i] * s;
  }
}

}  // namespace avx2

const Backend& avx2_backend() {
  static const Backend b = {
      "avx2",
      avx2::gemm_nn,
      avx2::gemm_nt_acc,
      avx2::gemm_tn_acc,
      avx2::dot,
      avx2::sum,
      avx2::axpy,
      avx2::vmadd,
      avx2::vadd,
      avx2::vsub,
      avx2::vmul,
      avx2::vscale,
      avx2::vexp,
      avx2::vlog,
      avx2::vtanh,
      avx2::vsoftplus,
      avx2::vsigmoid,
      avx2::tanh_bwd,
      avx2::softplus_bwd,
  };
  return b;
}

}  // namespace rtdnet::kernels

#endif  // x86_64
