#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "unfold/errors.hpp"

namespace unfold {

// Dyadic grid on the unit circle: 2^J bins, bin k = [k 2^-J, (k+1) 2^-J).
struct DyadicGrid {
  int J = 0;

  explicit DyadicGrid(int J_) : J(J_) {
    if (J < 0 || J > 24) throw ConfigError("grid exponent J out of range [0,24]");
  }
  std::size_t size() const { return std::size_t(1) << J; }
  double spacing() const { return 1.0 / double(size()); }
  // Left endpoint of bin k; function samples live here.
  double x(std::size_t k) const { return double(k) / double(size()); }
  double midpoint(std::size_t k) const { return (double(k) + 0.5) / double(size()); }
};

// Function values at the left endpoints of a dyadic grid.
struct SampledFunction {
  DyadicGrid grid;
  std::vector<double> values;

  SampledFunction(DyadicGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw ConfigError("sample count does not match grid size");
  }
  explicit SampledFunction(DyadicGrid g) : grid(g), values(g.size(), 0.0) {}
};

// Riemann sum of the sampled values: integral approximation at grid resolution.
inline double integrate(const SampledFunction& f) {
  double acc = 0.0;
  for (double v : f.values) acc += v;
  return acc * f.grid.spacing();
}

// Quadrature L2 norm: sqrt(2^-J sum v_k^2).
inline double l2_norm(const SampledFunction& f) {
  double acc = 0.0;
  for (double v : f.values) acc += v * v;
  return std::sqrt(acc * f.grid.spacing());
}

// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
  return splitmix64(splitmix64(seed) ^ (a + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

}  // namespace unfold
