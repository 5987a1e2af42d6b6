#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "unfold/estimator.hpp"
#include "unfold/operator.hpp"
#include "unfold/simulate.hpp"
#include "unfold/wavelet.hpp"

namespace unfold {

// Top-level run description. Parsed from strict JSON: unknown fields are
// rejected at every nesting level so typos fail loudly.
struct ExperimentConfig {
  int version = 1;
  int J = 8;
  int quad_resolution = 16;
  WaveletFilter filter = WaveletFilter::from_name("symmlet6");
  KernelSpec kernel;
  IntensitySpec intensity;
  EstimatorConfig estimator;
  std::vector<double> t_values;
  int replicates = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  std::string cache_dir = "cache";
  int threads = 1;
};

ExperimentConfig parse_config(const nlohmann::json& root);
ExperimentConfig load_config(const std::string& path);

// Round-trips through parse_config, so a manifest echo is itself a runnable
// config.
nlohmann::json config_json(const ExperimentConfig& cfg);

nlohmann::json kernel_spec_json(const KernelSpec& spec);
nlohmann::json intensity_spec_json(const IntensitySpec& spec);

}  // namespace unfold
