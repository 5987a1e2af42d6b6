#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unfold/config.hpp"

namespace unfold {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct RunOptions {
  std::string out_override;   // empty keeps cfg.out_dir
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool no_timestamp = false;  // drop SVG timestamps and manifest timings
  int threads_override = 0;   // 0 keeps cfg.threads
};

struct RunSummary {
  std::string out_dir;
  std::vector<std::string> outputs;  // relative to out_dir, sorted
};

// Fold the intensity and write one counts CSV (+ sidecar) per (t, replicate),
// plus manifest.json.
RunSummary run_simulate(ExperimentConfig cfg, const RunOptions& opts);

// Estimate from an existing counts file: model.json, fhat.csv, manifest.json.
RunSummary run_estimate(ExperimentConfig cfg, const std::string& counts_path,
                        const RunOptions& opts);

// Full sweep over t x replicates: rates.csv, report.json, one overlay SVG per
// t, a log-log rate SVG, manifest.json. Cells may run on a thread pool; each
// cell's RNG stream depends only on (master seed, t index, replicate index)
// and aggregation order is fixed, so outputs do not depend on thread count.
RunSummary run_experiment(ExperimentConfig cfg, const RunOptions& opts);

// Approximation/stability diagnostics across levels plus the lemma suite:
// diagnostics.json, manifest.json.
RunSummary run_diagnose(ExperimentConfig cfg, const RunOptions& opts);

}  // namespace unfold
