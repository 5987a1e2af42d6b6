#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "unfold/operator.hpp"
#include "unfold/simulate.hpp"
#include "unfold/wavelet.hpp"

namespace unfold {

// Member of the wavelet exponential family: f_{j,theta} = exp(sum theta psi).
struct ExpFamilyModel {
  int j = 0;
  int J = 0;
  WaveletFilter filter;
  Eigen::VectorXd theta;  // over {|lambda| < j}, coarse slot first

  // Grid values of log f (the exponent) at resolution J.
  SampledFunction log_values() const;
  // Grid values of f; strictly positive by construction.
  SampledFunction evaluate() const;
  // Quadrature moments <f, psi_lambda> for |lambda| < j.
  Eigen::VectorXd moments() const;
};

enum class EstimatorMode { nonlinear, linear };

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::nonlinear;
  double nu = 1.0;      // ill-posedness degree
  double s = 1.0;       // assumed smoothness (linear mode)
  int j_max = 32;       // user cap; effective cap is min(j_max, J-1)
  double newton_tol = 1e-8;
  int newton_max_iter = 100;
  double exp_clip = 50.0;
  double damping_floor = 9.5367431640625e-07;  // 2^-20
};

struct EstimateDiagnostics {
  int j = 0;
  int iterations = 0;
  double residual = 0.0;
  int n_surviving_coeffs = 0;
  bool capped = false;
};

struct EstimateResult {
  ExpFamilyModel model;
  EstimateDiagnostics diag;
};

// (1/t) integral of psi_lambda dG, computed exactly for binned data as the
// forward transform of c_{J,k} = 2^{J/2} N_k / t.
WaveletCoefficients empirical_coeffs(const CountData& data, const WaveletFilter& filter);

inline double soft_threshold(double x, double eps) {
  const double mag = std::fabs(x) - eps;
  return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

// 2^{nu max(|lambda|,0)} t^{-1/2} sqrt(|ln t|); the coarse slot shares the
// level-0 scale so total mass survives thresholding.
double threshold_schedule(WaveletIndex lambda, double t, double nu);

// min(ceil(log2(t) / (2 nu)), j_cap)
int cutoff_level(double t, double nu, int j_cap);

// Soft-threshold beta entrywise, then solve K_j alpha = thresholded vector.
Eigen::VectorXd invert_thresholded(const GalerkinMatrix& Kj, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& thresholds);

struct ProjectionResult {
  ExpFamilyModel model;
  int iterations = 0;
  double residual = 0.0;
};

// Damped Newton moment matching: find theta with <f_{j,theta}, psi_lambda> =
// alpha_lambda for all |lambda| < j (alpha.size() = 2^j). Step direction
// H^{-1}S with S = alpha - moments, step length halved until the residual
// norm decreases.
ProjectionResult information_projection(const Eigen::VectorXd& alpha,
                                        const WaveletFilter& filter, int J,
                                        const EstimatorConfig& cfg);

// Model level chosen by each pipeline for observation time t.
int nonlinear_level(double t, const EstimatorConfig& cfg, int J);
int linear_level(double t, const EstimatorConfig& cfg, int J);

// Full pipelines. `reuse` may hold the Galerkin matrix for the level the
// pipeline will select (shared across replicates); it is validated and
// ignored on mismatch.
EstimateResult estimate_nonlinear(const CountData& data, const StiffnessMatrix& K,
                                  const WaveletFilter& filter, const EstimatorConfig& cfg,
                                  const GalerkinMatrix* reuse = nullptr);
EstimateResult estimate_linear(const CountData& data, const StiffnessMatrix& K,
                               const WaveletFilter& filter, const EstimatorConfig& cfg,
                               const GalerkinMatrix* reuse = nullptr);

// {j, theta, filter, J, diagnostics{iterations, residual, n_surviving_coeffs, capped}}
void write_model_json(const std::string& path, const EstimateResult& result);
EstimateResult read_model_json(const std::string& path);
// CSV x,f_hat on the model's grid.
void write_fhat_csv(const std::string& path, const ExpFamilyModel& model);

}  // namespace unfold
