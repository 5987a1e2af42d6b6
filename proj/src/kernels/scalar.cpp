#include <cmath>
#include <cstddef>

#include "unfold/kernels.hpp"

// Reference kernels. std::fma is used for the filter accumulations so the
// AVX2 variants (which use hardware FMA in the same order) match bit-exactly.

namespace unfold::kernels {
namespace {

void analysis_step_scalar(const double* x, std::size_t n, const double* lo, const double* hi,
                          std::size_t taps, double* approx, double* detail) {
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t m = 0; m < taps; ++m) {
      const double v = x[(2 * k + m) % n];
      a = std::fma(lo[m], v, a);
      d = std::fma(hi[m], v, d);
    }
    approx[k] = a;
    detail[k] = d;
  }
}

// Output-centric (polyphase) form so the per-slot accumulation order is
// well defined: u ascending, low-pass term before high-pass term.
void synthesis_step_scalar(const double* approx, const double* detail, std::size_t half,
                           const double* lo, const double* hi, std::size_t taps, double* out) {
  const long h = long(half);
  for (std::size_t r = 0; r < half; ++r) {
    double even = 0.0, odd = 0.0;
    for (std::size_t u = 0; 2 * u < taps; ++u) {
      long k = (long(r) - long(u)) % h;
      if (k < 0) k += h;
      even = std::fma(lo[2 * u], approx[k], even);
      even = std::fma(hi[2 * u], detail[k], even);
      if (2 * u + 1 < taps) {
        odd = std::fma(lo[2 * u + 1], approx[k], odd);
        odd = std::fma(hi[2 * u + 1], detail[k], odd);
      }
    }
    out[2 * r] = even;
    out[2 * r + 1] = odd;
  }
}

double exp_array_scalar(const double* x, std::size_t n, double* out) {
  double max_abs = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::fabs(x[k]);
    if (a > max_abs) max_abs = a;
    out[k] = std::exp(x[k]);
  }
  return max_abs;
}

void soft_threshold_scalar(const double* x, const double* eps, std::size_t n, double* out) {
  for (std::size_t k = 0; k < n; ++k) {
    const double mag = std::fabs(x[k]) - eps[k];
    out[k] = mag > 0.0 ? std::copysign(mag, x[k]) : 0.0;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{analysis_step_scalar, synthesis_step_scalar, exp_array_scalar,
                       soft_threshold_scalar, "scalar"};
  return ops;
}

}  // namespace unfold::kernels
