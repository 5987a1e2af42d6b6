#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "unfold/grid.hpp"
#include "unfold/wavelet.hpp"

namespace unfold {

enum class KernelKind {
  log_potential_periodized,  // -log(0.5 |sin(pi (y-x))|), 1-periodic -> circulant
  log_potential_literal,     // -log(0.5 |sin((y-x)/2)|), even but not 1-periodic -> Toeplitz
  constant,
  tabulated,  // convolution profile h sampled uniformly on [0,1), linear interpolation
};

struct KernelSpec {
  KernelKind kind = KernelKind::log_potential_periodized;
  double value = 1.0;            // constant kind
  std::vector<double> profile;   // tabulated kind

  static KernelSpec from_name(const std::string& name);
  std::string kind_name() const;
  // Cache key: kind plus the parameters that change the matrix.
  std::string key(int J, int quad_resolution) const;
  bool singular() const {
    return kind == KernelKind::log_potential_periodized ||
           kind == KernelKind::log_potential_literal;
  }
  // 1-periodic profiles yield circulant stiffness matrices; the literal log
  // kernel is even but not 1-periodic, so its matrix is symmetric Toeplitz.
  bool circulant() const { return kind != KernelKind::log_potential_literal; }
  // Convolution profile h(u) with u = x - y.
  double profile_at(double u) const;
};

double kernel_eval(const KernelSpec& spec, double x, double y);

// Scaling-basis stiffness matrix, stored by its first row.
// Entry (l,k) = first_row[(k-l) mod 2^J] when circulant, first_row[|l-k|] otherwise.
struct StiffnessMatrix {
  int J = 0;
  int quad_resolution = 0;
  bool circulant = true;
  std::string key;
  std::vector<double> first_row;

  std::size_t size() const { return first_row.size(); }
  double entry(std::size_t l, std::size_t k) const {
    const std::size_t n = first_row.size();
    if (circulant) return first_row[(k + n - l) % n];
    return first_row[l > k ? l - k : k - l];
  }
  Eigen::MatrixXd dense() const;
};

// Double midpoint Riemann sum of k(x,y) phi_{J,l}(x) phi_{J,k}(y) at scale
// 2^-quad_resolution; the two integration grids are staggered by one octave
// so no quadrature node ever lands on the singular diagonal.
StiffnessMatrix build_stiffness_matrix(const KernelSpec& spec, int J, int quad_resolution);

// V_J Galerkin image of Kf as value samples: K_J applied to the sample
// vector (the 2^{+-J/2} basis scalings cancel). FFT path for circulants.
SampledFunction apply_operator(const StiffnessMatrix& K, const SampledFunction& f);

// Wavelet-domain Galerkin matrix: 2D wavelet transform of K_J (rows, then
// columns) restricted to {|lambda| < j}, symmetrized, factorized once.
struct GalerkinMatrix {
  int j = 0;
  Eigen::MatrixXd M;
  Eigen::LLT<Eigen::MatrixXd> llt;

  // Solve with one step of iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
};

GalerkinMatrix wavelet_galerkin_matrix(const StiffnessMatrix& K, const WaveletFilter& filter,
                                       int j);
// Explicit-matrix variant, for identity/oracle tests.
GalerkinMatrix make_galerkin(int j, Eigen::MatrixXd M);

struct GalerkinWavelet {
  WaveletIndex lambda;
  Eigen::VectorXd U;
};

GalerkinWavelet galerkin_wavelet(const GalerkinMatrix& Kj, WaveletIndex lambda);

// Ratio (a' K_j a) / sum_lambda 2^{-nu lvl} a_lambda^2 over seeded random
// vectors; returns (min, max). A report, not a pass/fail.
std::pair<double, double> ellipticity_diagnostic(const GalerkinMatrix& Kj, double nu,
                                                 int samples, std::uint64_t seed = 7102);

// Cache: first line is the key, then first_row entries in full decimal
// precision, one per line.
void save_stiffness(const StiffnessMatrix& K, const std::string& path);
StiffnessMatrix load_stiffness(const std::string& path);
// Loads when a cache file with a matching key exists, else builds and saves.
// Empty cache_dir disables caching.
StiffnessMatrix cached_stiffness(const KernelSpec& spec, int J, int quad_resolution,
                                 const std::string& cache_dir);

}  // namespace unfold
