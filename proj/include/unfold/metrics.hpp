#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "unfold/estimator.hpp"
#include "unfold/grid.hpp"
#include "unfold/wavelet.hpp"

namespace unfold {

// Relative entropy Delta(f; fhat) = integral of f log(f/fhat) - f + fhat,
// with 0 log 0 = 0; requires fhat > 0 and f >= 0 on the shared grid.
double kl_divergence(const SampledFunction& f, const SampledFunction& fhat);

// Quadrature L2 distance.
double l2_error(const SampledFunction& f, const SampledFunction& fhat);

// Exact sup over the span {psi_lambda : |lambda| < j} of ||v||_inf / ||v||_L2
// on the grid: max_k sqrt(sum_lambda psi_lambda(x_k)^2).
double measure_A_j(const WaveletFilter& filter, int J, int j);

struct TheoryDiagnostics {
  int j = 0;
  double D_j = 0.0;      // ||g - P_j g||_L2, g = log f
  double gamma_j = 0.0;  // ||g - P_j g||_inf
  double A_j = 0.0;      // sup-norm constant of V_j
  double M1 = 0.0;       // exp(max |log f|) on the grid
  double eps_j = 0.0;    // 2 M1^2 e^{2 gamma_j + 1} D_j A_j
  double rho_jt = 0.0;   // (2^{j(nu+1/2)}/sqrt(t) + 2^{j(nu+3/2)}/t)^2 + 2^{-2js}
  double delta_jt = 0.0; // 4 M1^2 e^{2 eps_j + 2 gamma_j + 2} A_j^2 rho_jt
};

TheoryDiagnostics theory_diagnostics(const SampledFunction& f, int j,
                                     const WaveletFilter& filter, double nu, double s,
                                     double t);

struct LemmaCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs for inequalities, relative gap for identities
  bool pass = false;
  bool applicable = true;  // false when the lemma's hypothesis fails for the instance
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (c.applicable && !c.pass) return false;
    return true;
  }
};

// Numeric verification of the entropy bounds: the two-sided sandwich
// (A.1-lower/upper) of Delta by weighted square norms of log(f/h); the
// exponential-family bounds between consecutive models (A.2-*); the
// Pythagorean identity through the projection of f's moments (3.1); and the
// stability bounds (3.2-*) where their hypothesis holds.
LemmaReport lemma_suite(const SampledFunction& f, const std::vector<ExpFamilyModel>& models);

nlohmann::json lemma_report_json(const LemmaReport& report);

struct RateRow {
  double t = 0.0;
  int replicate = 0;
  std::string loss_kind;
  double value = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::pair<double, double>> per_t_mean;  // (t, mean loss)
};

// OLS of log(mean loss) on log t for one loss kind.
RateFit rate_regression(const RateTable& table, const std::string& loss_kind);

void write_rate_csv(const RateTable& table, const std::string& path);
RateTable read_rate_csv(const std::string& path);

}  // namespace unfold
