#include "unfold/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "unfold/errors.hpp"
#include "unfold/estimator.hpp"
#include "unfold/metrics.hpp"
#include "unfold/operator.hpp"
#include "unfold/simulate.hpp"
#include "unfold/svg.hpp"

namespace unfold {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ExperimentConfig effective_config(ExperimentConfig cfg, const RunOptions& opts) {
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (opts.has_seed) cfg.seed = opts.seed;
  if (opts.threads_override > 0) cfg.threads = opts.threads_override;
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write on " + path);
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

json manifest_base(const char* command, const ExperimentConfig& cfg) {
  return json{{"artifact_version", kArtifactVersion},
              {"command", command},
              {"config", config_json(cfg)}};
}

void finish_manifest(json& manifest, RunSummary& sum, const json* timings) {
  sum.outputs.push_back("manifest.json");
  std::sort(sum.outputs.begin(), sum.outputs.end());
  manifest["outputs"] = sum.outputs;
  if (timings) manifest["timings"] = *timings;
  write_json_file(sum.out_dir + "/manifest.json", manifest);
}

// Runs work(0..n-1) on up to `threads` workers pulling from a shared counter.
// Unexpected exceptions (anything a cell did not absorb) propagate.
void run_cells(std::size_t n, int threads, const std::function<void(std::size_t)>& work) {
  const int workers = int(std::min<std::size_t>(std::max(threads, 1), n));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n; ++c) work(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= n) return;
        try {
          work(c);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

EstimateResult run_pipeline(const ExperimentConfig& cfg, const CountData& data,
                            const StiffnessMatrix& K, const GalerkinMatrix* reuse) {
  if (cfg.estimator.mode == EstimatorMode::linear)
    return estimate_linear(data, K, cfg.filter, cfg.estimator, reuse);
  return estimate_nonlinear(data, K, cfg.filter, cfg.estimator, reuse);
}

}  // namespace

RunSummary run_simulate(ExperimentConfig cfg0, const RunOptions& opts) {
  const ExperimentConfig cfg = effective_config(std::move(cfg0), opts);
  const auto t0 = Clock::now();
  ensure_dir(cfg.out_dir);

  const StiffnessMatrix K =
      cached_stiffness(cfg.kernel, cfg.J, cfg.quad_resolution, cfg.cache_dir);
  const double stiffness_s = elapsed(t0);
  const SampledFunction h = fold_intensity(cfg.intensity, K);
  const std::string ispec = intensity_spec_json(cfg.intensity).dump();

  RunSummary sum;
  sum.out_dir = cfg.out_dir;
  json seeds = json::array();
  for (std::size_t ti = 0; ti < cfg.t_values.size(); ++ti) {
    for (int r = 0; r < cfg.replicates; ++r) {
      const std::uint64_t seed = mix_seed(cfg.seed, std::uint64_t(ti), std::uint64_t(r));
      CountData data = simulate_counts(h, cfg.t_values[ti], seed);
      data.kernel_key = K.key;
      data.intensity_json = ispec;
      const std::string name =
          "counts_t" + std::to_string(ti) + "_r" + std::to_string(r) + ".csv";
      write_count_data(data, cfg.out_dir + "/" + name);
      sum.outputs.push_back(name);
      sum.outputs.push_back(name + ".json");
      seeds.push_back({{"t_index", ti},
                       {"t", cfg.t_values[ti]},
                       {"replicate", r},
                       {"seed", seed}});
    }
  }

  json manifest = manifest_base("simulate", cfg);
  manifest["stiffness_cache_key"] = K.key;
  manifest["cell_seeds"] = seeds;
  json timings{{"stiffness_seconds", stiffness_s}, {"total_seconds", elapsed(t0)}};
  finish_manifest(manifest, sum, opts.no_timestamp ? nullptr : &timings);
  return sum;
}

RunSummary run_estimate(ExperimentConfig cfg0, const std::string& counts_path,
                        const RunOptions& opts) {
  const ExperimentConfig cfg = effective_config(std::move(cfg0), opts);
  const auto t0 = Clock::now();
  ensure_dir(cfg.out_dir);

  const CountData data = read_count_data(counts_path);
  if (data.J != cfg.J)
    throw ConfigError("counts file has J=" + std::to_string(data.J) +
                      " but config has J=" + std::to_string(cfg.J));
  const StiffnessMatrix K =
      cached_stiffness(cfg.kernel, cfg.J, cfg.quad_resolution, cfg.cache_dir);
  const EstimateResult res = run_pipeline(cfg, data, K, nullptr);

  RunSummary sum;
  sum.out_dir = cfg.out_dir;
  write_model_json(cfg.out_dir + "/model.json", res);
  sum.outputs.push_back("model.json");
  write_fhat_csv(cfg.out_dir + "/fhat.csv", res.model);
  sum.outputs.push_back("fhat.csv");

  json manifest = manifest_base("estimate", cfg);
  manifest["stiffness_cache_key"] = K.key;
  manifest["counts_file"] = counts_path;
  manifest["counts"] = {{"J", data.J}, {"t", data.t}, {"seed", data.seed}};
  json timings{{"total_seconds", elapsed(t0)}};
  finish_manifest(manifest, sum, opts.no_timestamp ? nullptr : &timings);
  return sum;
}

RunSummary run_experiment(ExperimentConfig cfg0, const RunOptions& opts) {
  const ExperimentConfig cfg = effective_config(std::move(cfg0), opts);
  const auto t0 = Clock::now();
  ensure_dir(cfg.out_dir);

  const StiffnessMatrix K =
      cached_stiffness(cfg.kernel, cfg.J, cfg.quad_resolution, cfg.cache_dir);
  const double stiffness_s = elapsed(t0);
  const SampledFunction f = sample_intensity(cfg.intensity, cfg.J);
  const SampledFunction h = fold_intensity(cfg.intensity, K);

  // One Galerkin factorization per distinct level, shared by every cell.
  const std::size_t nt = cfg.t_values.size();
  std::vector<int> level_of_t(nt);
  std::map<int, GalerkinMatrix> galerkin;
  for (std::size_t ti = 0; ti < nt; ++ti) {
    const int j = cfg.estimator.mode == EstimatorMode::linear
                      ? linear_level(cfg.t_values[ti], cfg.estimator, cfg.J)
                      : nonlinear_level(cfg.t_values[ti], cfg.estimator, cfg.J);
    level_of_t[ti] = j;
    if (!galerkin.count(j)) galerkin.emplace(j, wavelet_galerkin_matrix(K, cfg.filter, j));
  }

  struct Cell {
    bool ok = false;
    std::string error;
    std::uint64_t seed = 0;
    double kl = 0.0, l2 = 0.0;
    EstimateDiagnostics diag;
    std::vector<double> fhat;
  };
  const int reps = cfg.replicates;
  std::vector<Cell> cells(nt * std::size_t(reps));
  const auto sweep0 = Clock::now();
  run_cells(cells.size(), cfg.threads, [&](std::size_t c) {
    const std::size_t ti = c / std::size_t(reps);
    const int r = int(c % std::size_t(reps));
    Cell& cell = cells[c];
    cell.seed = mix_seed(cfg.seed, std::uint64_t(ti), std::uint64_t(r));
    try {
      const CountData data = simulate_counts(h, cfg.t_values[ti], cell.seed);
      const EstimateResult res =
          run_pipeline(cfg, data, K, &galerkin.at(level_of_t[ti]));
      const SampledFunction fhat = res.model.evaluate();
      cell.kl = kl_divergence(f, fhat);
      cell.l2 = l2_error(f, fhat);
      cell.diag = res.diag;
      cell.fhat = fhat.values;
      cell.ok = true;
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });
  const double sweep_s = elapsed(sweep0);

  RunSummary sum;
  sum.out_dir = cfg.out_dir;

  // Fixed aggregation order: (t index, replicate).
  RateTable table;
  json failures = json::array();
  json seeds = json::array();
  std::size_t n_failed = 0;
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (int r = 0; r < reps; ++r) {
      const Cell& cell = cells[ti * std::size_t(reps) + r];
      seeds.push_back({{"t_index", ti},
                       {"t", cfg.t_values[ti]},
                       {"replicate", r},
                       {"seed", cell.seed}});
      if (cell.ok) {
        table.rows.push_back({cfg.t_values[ti], r, "kl", cell.kl});
        table.rows.push_back({cfg.t_values[ti], r, "l2", cell.l2});
      } else {
        ++n_failed;
        failures.push_back({{"t_index", ti},
                            {"t", cfg.t_values[ti]},
                            {"replicate", r},
                            {"error", cell.error}});
      }
    }
  }
  write_rate_csv(table, cfg.out_dir + "/rates.csv");
  sum.outputs.push_back("rates.csv");

  const double ref_slope =
      -2.0 * cfg.estimator.s / (2.0 * cfg.estimator.s + 2.0 * cfg.estimator.nu + 1.0);
  json losses = json::object();
  std::map<std::string, RateFit> fits;
  for (const char* kind : {"kl", "l2"}) {
    json entry;
    try {
      const RateFit fit = rate_regression(table, kind);
      fits[kind] = fit;
      json means = json::array();
      for (auto [t, mean] : fit.per_t_mean) means.push_back({{"t", t}, {"mean", mean}});
      entry = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"per_t_mean", means}};
    } catch (const Error& e) {
      entry = {{"slope", nullptr}, {"intercept", nullptr}, {"error", e.what()}};
    }
    losses[kind] = entry;
  }
  json levels = json::array();
  for (std::size_t ti = 0; ti < nt; ++ti)
    levels.push_back({{"t", cfg.t_values[ti]}, {"j", level_of_t[ti]}});
  const json report{{"losses", losses},
                    {"reference_slope", ref_slope},
                    {"levels", levels},
                    {"n_cells", cells.size()},
                    {"n_failed", n_failed},
                    {"failures", failures}};
  write_json_file(cfg.out_dir + "/report.json", report);
  sum.outputs.push_back("report.json");

  // Overlay per t: truth vs the first successful replicate.
  const DyadicGrid grid{cfg.J};
  for (std::size_t ti = 0; ti < nt; ++ti) {
    const Cell* shown = nullptr;
    for (int r = 0; r < reps && !shown; ++r) {
      const Cell& cell = cells[ti * std::size_t(reps) + r];
      if (cell.ok) shown = &cell;
    }
    if (!shown) continue;
    SvgPlot plot;
    plot.title = "intensity overlay, t = " + num(cfg.t_values[ti]);
    plot.x_label = "x";
    plot.y_label = "intensity";
    plot.timestamp = !opts.no_timestamp;
    SvgSeries truth{"true f", "", {}, false};
    SvgSeries est{"estimate", "", {}, false};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      truth.points.emplace_back(grid.x(k), f.values[k]);
      est.points.emplace_back(grid.x(k), shown->fhat[k]);
    }
    plot.series = {truth, est};
    const std::string name = "overlay_t" + std::to_string(ti) + ".svg";
    write_svg(plot, cfg.out_dir + "/" + name);
    sum.outputs.push_back(name);
  }

  // Log-log rate plot with the reference slope through the first KL mean.
  if (fits.count("kl") && fits["kl"].per_t_mean.size() >= 2) {
    SvgPlot plot;
    plot.title = "mean loss vs t";
    plot.x_label = "t";
    plot.y_label = "mean loss";
    plot.log_x = plot.log_y = true;
    plot.timestamp = !opts.no_timestamp;
    SvgSeries kl{"mean KL", "", {}, false};
    for (auto [t, mean] : fits["kl"].per_t_mean) kl.points.emplace_back(t, mean);
    plot.series.push_back(kl);
    if (fits.count("l2")) {
      SvgSeries l2{"mean L2", "", {}, false};
      for (auto [t, mean] : fits["l2"].per_t_mean) l2.points.emplace_back(t, mean);
      plot.series.push_back(l2);
    }
    SvgSeries ref{"slope " + num(ref_slope), "#888", {}, true};
    const auto [t_a, m_a] = fits["kl"].per_t_mean.front();
    for (auto [t, mean] : fits["kl"].per_t_mean)
      ref.points.emplace_back(t, m_a * std::pow(t / t_a, ref_slope));
    plot.series.push_back(ref);
    write_svg(plot, cfg.out_dir + "/rates.svg");
    sum.outputs.push_back("rates.svg");
  }

  json manifest = manifest_base("experiment", cfg);
  manifest["stiffness_cache_key"] = K.key;
  manifest["cell_seeds"] = seeds;
  json timings{{"stiffness_seconds", stiffness_s},
               {"sweep_seconds", sweep_s},
               {"total_seconds", elapsed(t0)}};
  finish_manifest(manifest, sum, opts.no_timestamp ? nullptr : &timings);
  return sum;
}

RunSummary run_diagnose(ExperimentConfig cfg0, const RunOptions& opts) {
  const ExperimentConfig cfg = effective_config(std::move(cfg0), opts);
  const auto t0 = Clock::now();
  ensure_dir(cfg.out_dir);

  const StiffnessMatrix K =
      cached_stiffness(cfg.kernel, cfg.J, cfg.quad_resolution, cfg.cache_dir);
  const SampledFunction f = sample_intensity(cfg.intensity, cfg.J);
  const int j_hi = std::min({cfg.estimator.j_max, cfg.J - 1, 8});
  const double nu = cfg.estimator.nu;

  // Approximation-theoretic quantities per level, with the level-t error
  // forecast delta_j^t for each configured t, plus the projection loss and
  // its ratio to e^{gamma_j} D_j^2 (reported, not asserted).
  json theory = json::array();
  std::map<int, ProjectionResult> projections;
  const WaveletCoefficients wf = dwt_forward(f, cfg.filter);
  for (int j = 1; j <= j_hi; ++j) {
    json row;
    const TheoryDiagnostics td =
        theory_diagnostics(f, j, cfg.filter, nu, cfg.estimator.s, cfg.t_values.front());
    row["j"] = j;
    row["D_j"] = td.D_j;
    row["gamma_j"] = td.gamma_j;
    row["A_j"] = td.A_j;
    row["M1"] = td.M1;
    row["eps_j"] = td.eps_j;
    json per_t = json::array();
    for (double t : cfg.t_values) {
      const TheoryDiagnostics tt =
          theory_diagnostics(f, j, cfg.filter, nu, cfg.estimator.s, t);
      per_t.push_back({{"t", t}, {"rho_jt", tt.rho_jt}, {"delta_jt", tt.delta_jt}});
    }
    row["per_t"] = per_t;
    try {
      const Eigen::VectorXd alpha =
          Eigen::Map<const Eigen::VectorXd>(wf.coeffs.data(), Eigen::Index(1) << j);
      const ProjectionResult pr =
          information_projection(alpha, cfg.filter, cfg.J, cfg.estimator);
      const double kl = kl_divergence(f, pr.model.evaluate());
      row["kl_projection"] = kl;
      row["thm41_ratio"] =
          td.D_j > 0.0 ? json(kl / (std::exp(td.gamma_j) * td.D_j * td.D_j)) : json();
      projections.emplace(j, pr);
    } catch (const Error& e) {
      row["projection_error"] = e.what();
    }
    theory.push_back(row);
  }

  // Galerkin wavelet norm envelope C_j = max_lambda |U_lambda|_2 / 2^{nu j}.
  json envelope = json::array();
  std::map<int, GalerkinMatrix> galerkin;
  for (int j = 1; j <= j_hi; ++j) {
    galerkin.emplace(j, wavelet_galerkin_matrix(K, cfg.filter, j));
    const GalerkinMatrix& Kj = galerkin.at(j);
    double worst = 0.0;
    const std::size_t p = std::size_t(1) << j;
    for (std::size_t lam = 0; lam < p; ++lam)
      worst = std::max(worst, galerkin_wavelet(Kj, index_of(lam)).U.norm());
    envelope.push_back({{"j", j},
                        {"max_norm", worst},
                        {"C_j", worst / std::pow(2.0, nu * j)}});
  }

  const int j_ell = std::min(6, j_hi);
  json ellipticity;
  if (j_ell >= 1) {
    const auto [c_min, c_max] = ellipticity_diagnostic(galerkin.at(j_ell), nu, 200);
    ellipticity = {{"j", j_ell}, {"samples", 200}, {"c_min", c_min}, {"c_max", c_max}};
  }

  // Lemma suite over projections at increasing levels plus one perturbed
  // companion at the top level to exercise the two-model bounds.
  std::vector<ExpFamilyModel> models;
  for (int j = 1; j <= std::min(3, j_hi); ++j) {
    auto it = projections.find(j);
    if (it != projections.end()) models.push_back(it->second.model);
  }
  if (!models.empty()) {
    ExpFamilyModel perturbed = models.back();
    perturbed.theta *= 0.95;
    models.push_back(perturbed);
  }
  json lemmas = models.empty() ? json() : lemma_report_json(lemma_suite(f, models));

  const json diagnostics{{"theory", theory},
                         {"galerkin_norm_envelope", envelope},
                         {"ellipticity", ellipticity},
                         {"lemmas", lemmas}};

  RunSummary sum;
  sum.out_dir = cfg.out_dir;
  write_json_file(cfg.out_dir + "/diagnostics.json", diagnostics);
  sum.outputs.push_back("diagnostics.json");

  json manifest = manifest_base("diagnose", cfg);
  manifest["stiffness_cache_key"] = K.key;
  json timings{{"total_seconds", elapsed(t0)}};
  finish_manifest(manifest, sum, opts.no_timestamp ? nullptr : &timings);
  return sum;
}

}  // namespace unfold
