#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unfold/grid.hpp"
#include "unfold/operator.hpp"

namespace unfold {

enum class IntensityKind { peak, fred, constant, tabulated };

struct FredPeak {
  double a = 0.0;        // amplitude
  double m = 0.0;        // location in [0,1)
  double sigma_r = 1.0;  // rise scale (left of m)
  double sigma_d = 1.0;  // decay scale (right of m)
  double nu = 1.0;       // peakedness exponent
};

struct IntensitySpec {
  IntensityKind kind = IntensityKind::peak;
  double value = 1.0;           // constant kind
  std::vector<double> values;   // tabulated kind, uniform samples on [0,1)
  double f0 = 20.0;             // fred background
  std::vector<FredPeak> peaks;  // fred peaks

  static IntensitySpec from_name(const std::string& name);
  std::string kind_name() const;
};

// max{1 - |30(x - 0.5)|, 0.1}
double peak_intensity(double x);
// f0 + sum_i a_i exp(-|x - m_i| / sigma^{nu_i}), sigma = sigma_r left of m_i,
// sigma_d right.
double fred_intensity(double x, const IntensitySpec& spec);

double intensity_eval(const IntensitySpec& spec, double x);

// Values at bin left endpoints; verifies strict positivity on the grid.
SampledFunction sample_intensity(const IntensitySpec& spec, int J);

// h = Kf on the grid.
SampledFunction fold_intensity(const IntensitySpec& spec, const StiffnessMatrix& K);

struct CountData {
  int J = 0;
  double t = 0.0;
  std::uint64_t seed = 0;
  std::vector<long long> counts;
  // Provenance for the sidecar manifest (optional, empty for external data).
  std::string kernel_key;
  std::string intensity_json;
};

// N_k ~ Poisson(t 2^-J h_k), one deterministic substream per bin, exact
// inversion below mean 10 and transformed rejection (PTRS) above.
CountData simulate_counts(const SampledFunction& h, double t, std::uint64_t seed);

// One exact Poisson draw from the given engine state.
long long poisson_draw(double mean, std::uint64_t substream_seed);

// CSV (bin_index,count) plus a JSON sidecar <path>.json carrying J, t, seed,
// kernel key, and the intensity spec.
void write_count_data(const CountData& data, const std::string& csv_path);
CountData read_count_data(const std::string& csv_path);

}  // namespace unfold
