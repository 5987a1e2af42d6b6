#include "unfold/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unfold/errors.hpp"
#include "unfold/kernels.hpp"

namespace unfold {

namespace {

// Symmlet-6 scaling taps (least-asymmetric orthonormal family, 12 taps,
// 6 vanishing moments).
const double kSym6[12] = {
    0.015404109327027373,   0.0034907120842174702, -0.11799011114819057,
    -0.048311742585633,     0.4910559419267466,    0.787641141030194,
    0.3379294217276218,     -0.07263752278646252,  -0.021060292512300564,
    0.04472490177066578,    0.0017677118642428036, -0.007800708325034148,
};

}  // namespace

WaveletFilter WaveletFilter::from_name(const std::string& name) {
  WaveletFilter f;
  if (name == "haar") {
    f.name = "haar";
    f.lo = {M_SQRT1_2, M_SQRT1_2};
    f.vanishing_moments = 1;
  } else if (name == "symmlet6" || name == "sym6") {
    f.name = "symmlet6";
    f.lo.assign(kSym6, kSym6 + 12);
    f.vanishing_moments = 6;
  } else {
    throw ConfigError("unknown wavelet filter: " + name);
  }
  const std::size_t L = f.lo.size();
  f.hi.resize(L);
  for (std::size_t m = 0; m < L; ++m) {
    const double tap = f.lo[L - 1 - m];
    f.hi[m] = (m % 2 == 0) ? tap : -tap;
  }
  return f;
}

WaveletIndex index_of(std::size_t flat) {
  if (flat == 0) return {-1, 0};
  int level = 0;
  while ((std::size_t(2) << level) <= flat) ++level;
  return {level, flat - (std::size_t(1) << level)};
}

// Centering shift for the pyramid convolution. Anchoring the filter at 2k
// carries its full group delay, which drifts features sideways in truncated
// reconstructions; gathering x[2k - shift .. 2k - shift + taps - 1] instead
// centers the taps over 2k so near-symmetric filters keep features in place.
// Haar (2 taps) gets shift 0 and is unchanged. The shift is a per-stage
// circular rotation, so orthonormality and round-trip exactness are untouched.
std::size_t center_shift(const WaveletFilter& filter) { return filter.taps() / 2 - 1; }

void forward_transform(std::vector<double>& v, const WaveletFilter& filter) {
  const std::size_t n = v.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("transform length must be a power of two");
  const auto& ops = kernels::active();
  const std::size_t shift = center_shift(filter);
  std::vector<double> approx(n / 2), detail(n / 2);
  std::size_t len = n;
  while (len >= 2) {
    if (const std::size_t r = shift % len)
      std::rotate(v.begin(), v.begin() + (len - r), v.begin() + len);
    ops.analysis_step(v.data(), len, filter.lo.data(), filter.hi.data(), filter.taps(),
                      approx.data(), detail.data());
    std::copy_n(approx.data(), len / 2, v.data());
    std::copy_n(detail.data(), len / 2, v.data() + len / 2);
    len /= 2;
  }
}

void inverse_transform(std::vector<double>& v, const WaveletFilter& filter) {
  const std::size_t n = v.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("transform length must be a power of two");
  const auto& ops = kernels::active();
  const std::size_t shift = center_shift(filter);
  std::vector<double> out(n);
  std::size_t len = 2;
  while (len <= n) {
    ops.synthesis_step(v.data(), v.data() + len / 2, len / 2, filter.lo.data(),
                       filter.hi.data(), filter.taps(), out.data());
    if (const std::size_t r = shift % len)
      std::rotate(out.begin(), out.begin() + r, out.begin() + len);
    std::copy_n(out.data(), len, v.data());
    len *= 2;
  }
}

WaveletCoefficients dwt_forward(const SampledFunction& f, const WaveletFilter& filter) {
  WaveletCoefficients w(f.grid.J);
  const double scale = std::pow(2.0, -0.5 * f.grid.J);
  w.coeffs = f.values;
  for (double& c : w.coeffs) c *= scale;
  forward_transform(w.coeffs, filter);
  return w;
}

SampledFunction dwt_inverse(const WaveletCoefficients& w, const WaveletFilter& filter) {
  SampledFunction f{DyadicGrid(w.J), w.coeffs};
  inverse_transform(f.values, filter);
  const double scale = std::pow(2.0, 0.5 * w.J);
  for (double& v : f.values) v *= scale;
  return f;
}

WaveletCoefficients project(const WaveletCoefficients& w, int j) {
  if (j < 0 || j > w.J) throw ConfigError("projection level out of range [0, J]");
  WaveletCoefficients out = w;
  const std::size_t keep = std::size_t(1) << std::min(j, w.J);
  for (std::size_t i = keep; i < out.size(); ++i) out.coeffs[i] = 0.0;
  return out;
}

SampledFunction basis_function(WaveletIndex idx, const WaveletFilter& filter, int J) {
  if (idx.level >= J) throw ConfigError("basis function level must be below J");
  WaveletCoefficients w(J);
  w.at(idx) = 1.0;
  return dwt_inverse(w, filter);
}

double besov_seq_norm(const WaveletCoefficients& w, double s, double p, double q, int d) {
  const bool p_inf = std::isinf(p);
  const bool q_inf = std::isinf(q);
  if (!p_inf && p < 1.0) throw ConfigError("Besov p must be >= 1");
  if (!q_inf && q < 1.0) throw ConfigError("Besov q must be >= 1");
  const double sigma = s + d * (0.5 - (p_inf ? 0.0 : 1.0 / p));

  // Per-level p-norms; coarse slot contributes at scale 0.
  auto level_norm = [&](std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double a = std::fabs(w.coeffs[i]);
      acc = p_inf ? std::max(acc, a) : acc + std::pow(a, p);
    }
    return p_inf ? acc : std::pow(acc, 1.0 / p);
  };

  double total = 0.0;
  double level0 = level_norm(0, 1);
  if (w.J > 0) {
    // Level 0 detail shares the 2^0 weight with the coarse slot.
    const double det0 = level_norm(1, 2);
    level0 = p_inf ? std::max(level0, det0)
                   : std::pow(std::pow(level0, p) + std::pow(det0, p), 1.0 / p);
  }
  if (q_inf)
    total = level0;
  else
    total = std::pow(level0, q);

  for (int j = 1; j < w.J; ++j) {
    const std::size_t begin = std::size_t(1) << j;
    const double lvl = std::pow(2.0, j * sigma) * level_norm(begin, 2 * begin);
    if (q_inf)
      total = std::max(total, lvl);
    else
      total += std::pow(lvl, q);
  }
  return q_inf ? total : std::pow(total, 1.0 / q);
}

}  // namespace unfold
