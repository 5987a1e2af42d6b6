#pragma once

#include <cstddef>
#include <string>

namespace unfold::kernels {

// Hot array primitives behind runtime dispatch. Scalar is the reference;
// the AVX2 variants keep the same per-element accumulation order (fused
// multiply-adds in tap order), so filter steps and thresholding agree
// bit-for-bit and exp agrees to ~1 ulp.
struct Ops {
  // One periodic filter-bank analysis step: for k in [0, n/2),
  //   approx[k] = sum_m lo[m] x[(2k+m) mod n]
  //   detail[k] = sum_m hi[m] x[(2k+m) mod n]
  void (*analysis_step)(const double* x, std::size_t n, const double* lo, const double* hi,
                        std::size_t taps, double* approx, double* detail);
  // Inverse step: out[(2k+m) mod n] += lo[m] approx[k] + hi[m] detail[k], n = 2*half.
  void (*synthesis_step)(const double* approx, const double* detail, std::size_t half,
                         const double* lo, const double* hi, std::size_t taps, double* out);
  // out[k] = exp(x[k]); returns max |x[k]| so callers can enforce exponent clips.
  double (*exp_array)(const double* x, std::size_t n, double* out);
  // out[k] = sign(x[k]) * max(|x[k]| - eps[k], 0)
  void (*soft_threshold)(const double* x, const double* eps, std::size_t n, double* out);
  const char* name;
};

// Active table. First call picks AVX2 when the CPU supports it (and the
// build enabled it); the UNFOLD_KERNELS env var ("scalar"/"avx2") overrides.
const Ops& active();

// Force a backend by name for tests; throws ConfigError on unknown/unavailable.
void force_backend(const std::string& name);

const Ops& scalar_ops();
bool avx2_available();

}  // namespace unfold::kernels
