#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "unfold/kernels.hpp"

// AVX2+FMA variants. Filter steps replicate the scalar accumulation order
// (taps ascending, low-pass before high-pass, fused multiply-add) on padded
// polyphase copies, so they are bit-exact against the scalar reference.
// exp_array uses a Cephes-style rational approximation (~1 ulp).

namespace unfold::kernels {
namespace {

thread_local std::vector<double> tl_pad_a;
thread_local std::vector<double> tl_pad_b;

void analysis_step_avx2(const double* x, std::size_t n, const double* lo, const double* hi,
                        std::size_t taps, double* approx, double* detail) {
  const std::size_t half = n / 2;
  const std::size_t upad = taps / 2 + 1;
  tl_pad_a.resize(half + upad);
  tl_pad_b.resize(half + upad);
  double* xe = tl_pad_a.data();
  double* xo = tl_pad_b.data();
  for (std::size_t i = 0; i < half + upad; ++i) {
    xe[i] = x[(2 * (i % half)) % n];
    xo[i] = x[(2 * (i % half) + 1) % n];
  }
  std::size_t k = 0;
  for (; k + 4 <= half; k += 4) {
    __m256d acc_a = _mm256_setzero_pd();
    __m256d acc_d = _mm256_setzero_pd();
    for (std::size_t m = 0; m < taps; ++m) {
      const double* src = (m % 2 == 0 ? xe : xo) + m / 2;
      const __m256d v = _mm256_loadu_pd(src + k);
      acc_a = _mm256_fmadd_pd(_mm256_set1_pd(lo[m]), v, acc_a);
      acc_d = _mm256_fmadd_pd(_mm256_set1_pd(hi[m]), v, acc_d);
    }
    _mm256_storeu_pd(approx + k, acc_a);
    _mm256_storeu_pd(detail + k, acc_d);
  }
  for (; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t m = 0; m < taps; ++m) {
      const double v = (m % 2 == 0 ? xe : xo)[m / 2 + k];
      a = std::fma(lo[m], v, a);
      d = std::fma(hi[m], v, d);
    }
    approx[k] = a;
    detail[k] = d;
  }
}

void synthesis_step_avx2(const double* approx, const double* detail, std::size_t half,
                         const double* lo, const double* hi, std::size_t taps, double* out) {
  const std::size_t utop = (taps - 1) / 2;
  tl_pad_a.resize(half + utop);
  tl_pad_b.resize(half + utop);
  double* apad = tl_pad_a.data();
  double* dpad = tl_pad_b.data();
  for (std::size_t i = 0; i < half + utop; ++i) {
    const std::size_t src = (i + half * (utop / half + 1) - utop) % half;
    apad[i] = approx[src];
    dpad[i] = detail[src];
  }
  std::size_t r = 0;
  for (; r + 4 <= half; r += 4) {
    __m256d even = _mm256_setzero_pd();
    __m256d odd = _mm256_setzero_pd();
    for (std::size_t u = 0; 2 * u < taps; ++u) {
      const __m256d av = _mm256_loadu_pd(apad + r + utop - u);
      const __m256d dv = _mm256_loadu_pd(dpad + r + utop - u);
      even = _mm256_fmadd_pd(_mm256_set1_pd(lo[2 * u]), av, even);
      even = _mm256_fmadd_pd(_mm256_set1_pd(hi[2 * u]), dv, even);
      if (2 * u + 1 < taps) {
        odd = _mm256_fmadd_pd(_mm256_set1_pd(lo[2 * u + 1]), av, odd);
        odd = _mm256_fmadd_pd(_mm256_set1_pd(hi[2 * u + 1]), dv, odd);
      }
    }
    const __m256d a = _mm256_unpacklo_pd(even, odd);
    const __m256d b = _mm256_unpackhi_pd(even, odd);
    _mm256_storeu_pd(out + 2 * r, _mm256_permute2f128_pd(a, b, 0x20));
    _mm256_storeu_pd(out + 2 * r + 4, _mm256_permute2f128_pd(a, b, 0x31));
  }
  for (; r < half; ++r) {
    double even = 0.0, odd = 0.0;
    for (std::size_t u = 0; 2 * u < taps; ++u) {
      const double av = apad[r + utop - u];
      const double dv = dpad[r + utop - u];
      even = std::fma(lo[2 * u], av, even);
      even = std::fma(hi[2 * u], dv, even);
      if (2 * u + 1 < taps) {
        odd = std::fma(lo[2 * u + 1], av, odd);
        odd = std::fma(hi[2 * u + 1], dv, odd);
      }
    }
    out[2 * r] = even;
    out[2 * r + 1] = odd;
  }
}

// exp via 2^n * expm-style rational on the reduced argument (Cephes layout).
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
  const __m256d max_x = _mm256_set1_pd(708.0);
  const __m256d min_x = _mm256_set1_pd(-708.0);

  const __m256d clamped = _mm256_max_pd(_mm256_min_pd(x, max_x), min_x);
  __m256d nf = _mm256_round_pd(_mm256_mul_pd(clamped, log2e),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nf, c1, clamped);
  r = _mm256_fnmadd_pd(nf, c2, r);
  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(p0, rr, p1);
  p = _mm256_fmadd_pd(p, rr, p2);
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(q0, rr, q1);
  q = _mm256_fmadd_pd(q, rr, q2);
  q = _mm256_fmadd_pd(q, rr, q3);
  const __m256d e = _mm256_fmadd_pd(_mm256_set1_pd(2.0),
                                    _mm256_div_pd(p, _mm256_sub_pd(q, p)),
                                    _mm256_set1_pd(1.0));
  // Scale by 2^n in two halves to keep each factor's exponent in range.
  const __m128i ni = _mm256_cvtpd_epi32(nf);
  const __m128i n1 = _mm_srai_epi32(ni, 1);
  const __m128i n2 = _mm_sub_epi32(ni, n1);
  const __m128i bias = _mm_set1_epi32(1023);
  const __m256i e1 = _mm256_slli_epi64(_mm256_cvtepi32_epi64(_mm_add_epi32(n1, bias)), 52);
  const __m256i e2 = _mm256_slli_epi64(_mm256_cvtepi32_epi64(_mm_add_epi32(n2, bias)), 52);
  const __m256d s1 = _mm256_castsi256_pd(e1);
  const __m256d s2 = _mm256_castsi256_pd(e2);
  return _mm256_mul_pd(_mm256_mul_pd(e, s1), s2);
}

double exp_array_avx2(const double* x, std::size_t n, double* out) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d vmax = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    vmax = _mm256_max_pd(vmax, _mm256_and_pd(v, abs_mask));
    _mm256_storeu_pd(out + k, exp4(v));
  }
  double max_abs = 0.0;
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, vmax);
  for (int i = 0; i < 4; ++i)
    if (lanes[i] > max_abs) max_abs = lanes[i];
  for (; k < n; ++k) {
    const double a = std::fabs(x[k]);
    if (a > max_abs) max_abs = a;
    alignas(32) double tmp[4] = {x[k], 0.0, 0.0, 0.0};
    alignas(32) double res[4];
    _mm256_store_pd(res, exp4(_mm256_load_pd(tmp)));
    out[k] = res[0];
  }
  return max_abs;
}

void soft_threshold_avx2(const double* x, const double* eps, std::size_t n, double* out) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  const __m256d sign_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000ULL));
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    const __m256d e = _mm256_loadu_pd(eps + k);
    const __m256d mag = _mm256_max_pd(_mm256_sub_pd(_mm256_and_pd(v, abs_mask), e),
                                      _mm256_setzero_pd());
    _mm256_storeu_pd(out + k, _mm256_or_pd(mag, _mm256_and_pd(v, sign_mask)));
  }
  for (; k < n; ++k) {
    const double mag = std::fabs(x[k]) - eps[k];
    out[k] = mag > 0.0 ? std::copysign(mag, x[k]) : 0.0;
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{analysis_step_avx2, synthesis_step_avx2, exp_array_avx2,
                       soft_threshold_avx2, "avx2"};
  return ops;
}

}  // namespace unfold::kernels
