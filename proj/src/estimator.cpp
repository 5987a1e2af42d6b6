#include "unfold/estimator.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "unfold/errors.hpp"
#include "unfold/kernels.hpp"

namespace unfold {

SampledFunction ExpFamilyModel::log_values() const {
  WaveletCoefficients w(J);
  for (int i = 0; i < theta.size(); ++i) w.coeffs[i] = theta[i];
  return dwt_inverse(w, filter);
}

SampledFunction ExpFamilyModel::evaluate() const {
  SampledFunction g = log_values();
  SampledFunction f{g.grid};
  kernels::active().exp_array(g.values.data(), g.values.size(), f.values.data());
  return f;
}

Eigen::VectorXd ExpFamilyModel::moments() const {
  SampledFunction f = evaluate();
  WaveletCoefficients w = dwt_forward(f, filter);
  return Eigen::Map<const Eigen::VectorXd>(w.coeffs.data(), theta.size());
}

WaveletCoefficients empirical_coeffs(const CountData& data, const WaveletFilter& filter) {
  if (data.t <= 0.0) throw ConfigError("empirical coefficients require t > 0");
  DyadicGrid grid(data.J);
  if (data.counts.size() != grid.size()) throw ConfigError("counts length is not 2^J");
  SampledFunction fhat(grid);
  const double scale = double(grid.size()) / data.t;  // N_k / (t 2^-J)
  for (std::size_t k = 0; k < grid.size(); ++k)
    fhat.values[k] = scale * double(data.counts[k]);
  return dwt_forward(fhat, filter);
}

double threshold_schedule(WaveletIndex lambda, double t, double nu) {
  if (t <= 0.0) throw ConfigError("threshold schedule requires t > 0");
  const int lvl = lambda.level < 0 ? 0 : lambda.level;
  return std::pow(2.0, nu * lvl) / std::sqrt(t) * std::sqrt(std::fabs(std::log(t)));
}

int cutoff_level(double t, double nu, int j_cap) {
  if (t <= 1.0) throw ConfigError("cutoff level requires t > 1");
  if (nu <= 0.0) throw ConfigError("cutoff level requires nu > 0");
  // Nudge below the ceiling so exact dyadic cases are not bumped a level by
  // floating-point noise.
  const int uncapped = int(std::ceil(std::log2(t) / (2.0 * nu) - 1e-12));
  return std::min(uncapped, j_cap);
}

Eigen::VectorXd invert_thresholded(const GalerkinMatrix& Kj, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& thresholds) {
  if (beta.size() != Kj.M.rows() || thresholds.size() != beta.size())
    throw ConfigError("invert_thresholded dimension mismatch");
  Eigen::VectorXd th(beta.size());
  kernels::active().soft_threshold(beta.data(), thresholds.data(), beta.size(), th.data());
  return Kj.solve(th);
}

namespace {

// Analysis rows W_{lambda k} for |lambda| < 2^j_dim, each the inverse pyramid
// of a unit coefficient vector; row lambda holds 2^{-J/2} psi_lambda(x_k).
Eigen::MatrixXd analysis_block(const WaveletFilter& filter, int J, Eigen::Index p) {
  const std::size_t n = std::size_t(1) << J;
  Eigen::MatrixXd W(p, n);
  std::vector<double> e(n);
  for (Eigen::Index lam = 0; lam < p; ++lam) {
    std::fill(e.begin(), e.end(), 0.0);
    e[std::size_t(lam)] = 1.0;
    inverse_transform(e, filter);
    for (std::size_t k = 0; k < n; ++k) W(lam, k) = e[k];
  }
  return W;
}

struct NewtonState {
  Eigen::VectorXd theta;
  Eigen::VectorXd values;   // sum theta psi on the grid
  Eigen::VectorXd f;        // exp(values)
  Eigen::VectorXd moments;  // <f, psi_lambda>
  Eigen::VectorXd S;        // alpha - moments
  double res2 = 0.0;
  double res_inf = 0.0;
  double max_exponent = 0.0;
};

}  // namespace

ProjectionResult information_projection(const Eigen::VectorXd& alpha,
                                        const WaveletFilter& filter, int J,
                                        const EstimatorConfig& cfg) {
  const Eigen::Index p = alpha.size();
  if (p <= 0 || (p & (p - 1)) != 0 || p > (Eigen::Index(1) << J))
    throw ConfigError("projection target size must be a power of two <= 2^J");
  if (!alpha.allFinite()) throw ConfigError("projection target contains non-finite values");
  if (!(alpha[0] > 0.0))
    throw InfeasibleTargetError(
        "alpha_coarse = " + std::to_string(alpha[0]) +
        " <= 0: zero total mass lies outside the exponential family");
  int j = 0;
  while ((Eigen::Index(1) << j) < p) ++j;

  const std::size_t n = std::size_t(1) << J;
  const double root_n = std::sqrt(double(n));  // 2^{J/2}
  const auto& ops = kernels::active();
  const Eigen::MatrixXd W = analysis_block(filter, J, p);

  auto evaluate = [&](const Eigen::VectorXd& theta, NewtonState& st) {
    st.theta = theta;
    st.values.noalias() = root_n * (W.transpose() * theta);
    st.f.resize(n);
    st.max_exponent = ops.exp_array(st.values.data(), n, st.f.data());
    st.moments.noalias() = (W * st.f) / root_n;
    st.S = alpha - st.moments;
    st.res2 = st.S.norm();
    st.res_inf = st.S.lpNorm<Eigen::Infinity>();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta[0] = std::log(std::max(alpha[0], 1e-300));
  NewtonState cur;
  evaluate(theta, cur);
  if (cur.max_exponent > cfg.exp_clip)
    throw ExponentOverflowError("initial exponent magnitude " +
                                std::to_string(cur.max_exponent) + " exceeds the clip bound");

  std::vector<double> row(n), rowt(n);
  Eigen::MatrixXd H(p, p);
  int iter = 0;
  while (cur.res_inf > cfg.newton_tol) {
    if (iter >= cfg.newton_max_iter)
      throw InfeasibleTargetError("projection did not converge in " +
                                  std::to_string(cfg.newton_max_iter) +
                                  " iterations; last residual " + std::to_string(cur.res_inf));
    ++iter;

    // Hessian rows by the filter-bank route: scale an analysis row by the
    // grid weights f, forward-transform, keep the block.
    for (Eigen::Index lam = 0; lam < p; ++lam) {
      for (std::size_t k = 0; k < n; ++k) row[k] = W(lam, k) * cur.f[k];
      rowt = row;
      forward_transform(rowt, filter);
      for (Eigen::Index kap = 0; kap < p; ++kap) H(lam, kap) = rowt[std::size_t(kap)];
    }
    H = 0.5 * (H + H.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success)
      throw SingularHessianError("projection Hessian is not positive definite at iteration " +
                                 std::to_string(iter));
    const Eigen::VectorXd step = llt.solve(cur.S);
    if (!step.allFinite())
      throw SingularHessianError("projection Newton step is non-finite at iteration " +
                                 std::to_string(iter));

    double gamma = 1.0;
    NewtonState trial;
    for (;;) {
      evaluate(cur.theta + gamma * step, trial);
      if (trial.res2 < cur.res2) break;  // NaN comparisons fail, rejecting overflowed trials
      gamma *= 0.5;
      if (gamma < cfg.damping_floor)
        throw InfeasibleTargetError(
            "damping floor reached (residual " + std::to_string(cur.res_inf) +
            "); target moments appear infeasible");
    }
    cur = trial;
    if (cur.max_exponent > cfg.exp_clip)
      throw ExponentOverflowError("exponent magnitude " + std::to_string(cur.max_exponent) +
                                  " exceeds the clip bound " + std::to_string(cfg.exp_clip) +
                                  " at iteration " + std::to_string(iter));
  }

  ProjectionResult out;
  out.model.j = j;
  out.model.J = J;
  out.model.filter = filter;
  out.model.theta = cur.theta;
  out.iterations = iter;
  out.residual = cur.res_inf;
  return out;
}

int nonlinear_level(double t, const EstimatorConfig& cfg, int J) {
  return std::max(0, cutoff_level(t, cfg.nu, std::min(cfg.j_max, J - 1)));
}

int linear_level(double t, const EstimatorConfig& cfg, int J) {
  if (t <= 1.0) throw ConfigError("linear level requires t > 1");
  const int j = int(std::floor(std::log2(t) / (2.0 * cfg.s + 2.0 * cfg.nu + 1.0) + 1e-12));
  return std::max(0, std::min(j, std::min(cfg.j_max, J - 1)));
}

namespace {

EstimateResult run_pipeline(const CountData& data, const StiffnessMatrix& K,
                            const WaveletFilter& filter, const EstimatorConfig& cfg,
                            const GalerkinMatrix* reuse, bool nonlinear) {
  if (data.J != K.J) throw ConfigError("counts resolution disagrees with stiffness matrix");
  const int j_cap = std::min(cfg.j_max, K.J - 1);
  const int uncapped = nonlinear
                           ? cutoff_level(data.t, cfg.nu, 1 << 20)
                           : int(std::floor(std::log2(data.t) /
                                            (2.0 * cfg.s + 2.0 * cfg.nu + 1.0) + 1e-12));
  const int j = std::max(0, std::min(uncapped, j_cap));
  const Eigen::Index p = Eigen::Index(1) << j;

  WaveletCoefficients beta_full = empirical_coeffs(data, filter);
  Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(beta_full.coeffs.data(), p);

  const GalerkinMatrix* Kj = reuse && reuse->j == j ? reuse : nullptr;
  GalerkinMatrix local;
  if (!Kj) {
    local = wavelet_galerkin_matrix(K, filter, j);
    Kj = &local;
  }

  Eigen::VectorXd alpha;
  int surviving = 0;
  if (nonlinear) {
    Eigen::VectorXd eps(p);
    for (Eigen::Index i = 0; i < p; ++i)
      eps[i] = threshold_schedule(index_of(std::size_t(i)), data.t, cfg.nu);
    Eigen::VectorXd th(p);
    kernels::active().soft_threshold(beta.data(), eps.data(), std::size_t(p), th.data());
    for (Eigen::Index i = 0; i < p; ++i)
      if (th[i] != 0.0) ++surviving;
    alpha = Kj->solve(th);
  } else {
    alpha = Kj->solve(beta);
    surviving = int(p);
  }

  ProjectionResult proj = information_projection(alpha, filter, K.J, cfg);
  EstimateResult out;
  out.model = std::move(proj.model);
  out.diag.j = j;
  out.diag.iterations = proj.iterations;
  out.diag.residual = proj.residual;
  out.diag.n_surviving_coeffs = surviving;
  out.diag.capped = uncapped > j_cap;
  return out;
}

}  // namespace

EstimateResult estimate_nonlinear(const CountData& data, const StiffnessMatrix& K,
                                  const WaveletFilter& filter, const EstimatorConfig& cfg,
                                  const GalerkinMatrix* reuse) {
  if (cfg.mode != EstimatorMode::nonlinear)
    throw ConfigError("estimate_nonlinear called with mode != nonlinear");
  return run_pipeline(data, K, filter, cfg, reuse, true);
}

EstimateResult estimate_linear(const CountData& data, const StiffnessMatrix& K,
                               const WaveletFilter& filter, const EstimatorConfig& cfg,
                               const GalerkinMatrix* reuse) {
  if (cfg.mode != EstimatorMode::linear)
    throw ConfigError("estimate_linear called with mode != linear");
  return run_pipeline(data, K, filter, cfg, reuse, false);
}

void write_model_json(const std::string& path, const EstimateResult& result) {
  nlohmann::json doc;
  doc["j"] = result.model.j;
  doc["theta"] = std::vector<double>(result.model.theta.data(),
                                     result.model.theta.data() + result.model.theta.size());
  doc["filter"] = result.model.filter.name;
  doc["J"] = result.model.J;
  doc["diagnostics"] = {{"iterations", result.diag.iterations},
                        {"residual", result.diag.residual},
                        {"n_surviving_coeffs", result.diag.n_surviving_coeffs},
                        {"capped", result.diag.capped}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write model JSON: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("short write on model JSON: " + path);
}

EstimateResult read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model JSON: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
    EstimateResult r;
    r.model.j = doc.at("j").get<int>();
    r.model.J = doc.at("J").get<int>();
    r.model.filter = WaveletFilter::from_name(doc.at("filter").get<std::string>());
    const auto theta = doc.at("theta").get<std::vector<double>>();
    r.model.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
    const auto& d = doc.at("diagnostics");
    r.diag.j = r.model.j;
    r.diag.iterations = d.at("iterations").get<int>();
    r.diag.residual = d.at("residual").get<double>();
    r.diag.n_surviving_coeffs = d.at("n_surviving_coeffs").get<int>();
    r.diag.capped = d.at("capped").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model JSON: ") + e.what());
  }
}

void write_fhat_csv(const std::string& path, const ExpFamilyModel& model) {
  SampledFunction f = model.evaluate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write f_hat CSV: " + path);
  out << "x,f_hat\n";
  char buf[96];
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.grid.x(k), f.values[k]);
    out << buf;
  }
  if (!out) throw IoError("short write on f_hat CSV: " + path);
}

}  // namespace unfold
