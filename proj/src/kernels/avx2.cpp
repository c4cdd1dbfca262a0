#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include "ops.hpp"

// AVX2+FMA variants. exp() uses the classical Cephes rational approximation
// (~1 ulp over the normal range); everything else is straight lane-parallel
// arithmetic with scalar remainder loops.

namespace hdgm::kernels::detail {
namespace {

constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kC1 = 6.93145751953125e-1;
constexpr double kC2 = 1.42860682030941723212e-6;
constexpr double kExpMax = 709.782712893383996843;
constexpr double kExpMin = -745.13321910194110842;

constexpr double kP0 = 1.26177193074810590878e-4;
constexpr double kP1 = 3.02994407707441961300e-2;
constexpr double kP2 = 9.99999999999999999910e-1;
constexpr double kQ0 = 3.00198505138664455042e-6;
constexpr double kQ1 = 2.52448340349684104192e-3;
constexpr double kQ2 = 2.27265548208155028766e-1;
constexpr double kQ3 = 2.00000000000000000005e0;

inline __m256d exp_pd(__m256d x) {
  const __m256d max_x = _mm256_set1_pd(kExpMax);
  const __m256d min_x = _mm256_set1_pd(kExpMin);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, min_x), max_x);

  // n = floor(log2(e)*x + 0.5); r = x - n*ln2 in two pieces
  const __m256d n_real =
      _mm256_floor_pd(_mm256_fmadd_pd(xc, _mm256_set1_pd(kLog2E), _mm256_set1_pd(0.5)));
  __m256d r = _mm256_fnmadd_pd(n_real, _mm256_set1_pd(kC1), xc);
  r = _mm256_fnmadd_pd(n_real, _mm256_set1_pd(kC2), r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(kP0), rr, _mm256_set1_pd(kP1));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(kP2));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(kQ0), rr, _mm256_set1_pd(kQ1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kQ2));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kQ3));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // scale by 2^n in two halves so n up to +-1074 stays in exponent range
  const __m128i n32 = _mm256_cvtpd_epi32(n_real);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256d half_real = _mm256_round_pd(_mm256_mul_pd(n_real, _mm256_set1_pd(0.5)),
                                            _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
  const __m128i h32 = _mm256_cvtpd_epi32(half_real);
  const __m256i h64 = _mm256_cvtepi32_epi64(h32);
  const __m256i rest = _mm256_sub_epi64(n64, h64);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256d pow_a = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(h64, bias), 52));
  const __m256d pow_b = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(rest, bias), 52));
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow_a), pow_b);

  // saturate outside the clamp range and pass NaN through
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), _mm256_cmp_pd(x, min_x, _CMP_LT_OQ));
  e = _mm256_blendv_pd(e, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                       _mm256_cmp_pd(x, max_x, _CMP_GT_OQ));
  e = _mm256_blendv_pd(e, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return e;
}

void exp_neg_scaled_avx2(double* dst, const double* src, std::size_t n, double scale) {
  const __m256d neg_scale = _mm256_set1_pd(-scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_mul_pd(_mm256_loadu_pd(src + i), neg_scale);
    _mm256_storeu_pd(dst + i, exp_pd(x));
  }
  if (i < n) {
    // run the tail through the same vector path so results do not depend on
    // where the array length falls relative to the lane width
    double in[4] = {0, 0, 0, 0};
    double out[4];
    std::memcpy(in, src + i, (n - i) * sizeof(double));
    const __m256d x = _mm256_mul_pd(_mm256_loadu_pd(in), neg_scale);
    _mm256_storeu_pd(out, exp_pd(x));
    std::memcpy(dst + i, out, (n - i) * sizeof(double));
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}





void shift_scale_avx2(double* dst, const double* src, std::size_t n, double shift, double scale) {
  const __m256d sh = _mm256_set1_pd(shift);
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(src + i), sh), sc));
  }
  for (; i < n; ++i) dst[i] = (src[i] - shift) * scale;
}

void scale_shift_avx2(double* dst, const double* src, std::size_t n, double scale, double shift) {
  const __m256d sh = _mm256_set1_pd(shift);
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_fmadd_pd(_mm256_loadu_pd(src + i), sc, sh));
  }
  for (; i < n; ++i) dst[i] = src[i] * scale + shift;
}

PairAccum finite_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffll));
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d acc = _mm256_setzero_pd();
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    // finite <=> |x| < inf (false for NaN and +-inf)
    const __m256d ok_a = _mm256_cmp_pd(_mm256_and_pd(va, abs_mask), inf, _CMP_LT_OQ);
    const __m256d ok_b = _mm256_cmp_pd(_mm256_and_pd(vb, abs_mask), inf, _CMP_LT_OQ);
    const __m256d mask = _mm256_and_pd(ok_a, ok_b);
    const __m256d d = _mm256_and_pd(_mm256_sub_pd(va, vb), mask);
    acc = _mm256_fmadd_pd(d, d, acc);
    count += static_cast<std::size_t>(__builtin_popcount(
        static_cast<unsigned>(_mm256_movemask_pd(mask))));
  }
  PairAccum out;
  out.sum_sq = hsum(acc);
  out.count = count;
  for (; i < n; ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      const double d = a[i] - b[i];
      out.sum_sq += d * d;
      ++out.count;
    }
  }
  return out;
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      exp_neg_scaled_avx2,
      shift_scale_avx2,
      scale_shift_avx2,
      finite_sq_diff_avx2,
  };
  return ops;
}

}  // namespace hdgm::kernels::detail
