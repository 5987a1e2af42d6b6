#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "unfold/grid.hpp"

namespace unfold {

// Orthonormal two-channel filter pair on the circle. `lo` holds the
// scaling taps; `hi` is derived by the quadrature-mirror rule
// g_m = (-1)^m lo[taps-1-m].
struct WaveletFilter {
  std::string name;
  std::vector<double> lo;
  std::vector<double> hi;
  int vanishing_moments = 0;

  static WaveletFilter from_name(const std::string& name);
  std::size_t taps() const { return lo.size(); }
};

// Index in the inhomogeneous tree: level -1 is the single coarse slot,
// level j in [0, J) has 2^j positions.
struct WaveletIndex {
  int level = -1;
  std::size_t pos = 0;
};

inline std::size_t flat_index(WaveletIndex idx) {
  return idx.level < 0 ? 0 : (std::size_t(1) << idx.level) + idx.pos;
}

// Inverse of flat_index: 0 -> coarse, 2^j + k -> (j, k).
WaveletIndex index_of(std::size_t flat);

// Level with the coarse slot folded to 0; this is the scale used by the
// threshold schedule and Besov weights.
inline int effective_level(std::size_t flat) {
  const WaveletIndex idx = index_of(flat);
  return idx.level < 0 ? 0 : idx.level;
}

// Full coefficient tree on a 2^J grid, stored flat (coarse first).
struct WaveletCoefficients {
  int J = 0;
  std::vector<double> coeffs;

  explicit WaveletCoefficients(int J_)
      : J(J_), coeffs(std::size_t(1) << J_, 0.0) {
    if (J < 0 || J > 24) throw ConfigError("coefficient tree exponent J out of range");
  }
  std::size_t size() const { return coeffs.size(); }
  double& operator[](std::size_t i) { return coeffs[i]; }
  double operator[](std::size_t i) const { return coeffs[i]; }
  double& at(WaveletIndex idx) { return coeffs[flat_index(idx)]; }
  double at(WaveletIndex idx) const { return coeffs[flat_index(idx)]; }
};

// Full periodic pyramid on a raw coefficient vector (length a power of two),
// no sample scaling. forward: fine -> coarse; inverse: coarse -> fine.
void forward_transform(std::vector<double>& v, const WaveletFilter& filter);
void inverse_transform(std::vector<double>& v, const WaveletFilter& filter);

// Sample values <-> coefficient tree, with the c_{J,k} = 2^{-J/2} value_k
// normalization so the tree is orthonormal in L2[0,1).
WaveletCoefficients dwt_forward(const SampledFunction& f, const WaveletFilter& filter);
SampledFunction dwt_inverse(const WaveletCoefficients& w, const WaveletFilter& filter);

// Zero all coefficients with level >= j (coarse slot always kept).
WaveletCoefficients project(const WaveletCoefficients& w, int j);

// Grid samples of the basis function for one index (scaling function for
// the coarse slot, wavelet otherwise).
SampledFunction basis_function(WaveletIndex idx, const WaveletFilter& filter, int J);

// Inhomogeneous Besov sequence norm with smoothness weight
// 2^{j(s + d(1/2 - 1/p))}; p or q may be infinity.
double besov_seq_norm(const WaveletCoefficients& w, double s, double p, double q, int d = 1);

}  // namespace unfold
