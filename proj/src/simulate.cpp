#include "unfold/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "unfold/errors.hpp"

namespace unfold {

IntensitySpec IntensitySpec::from_name(const std::string& name) {
  IntensitySpec s;
  if (name == "peak")
    s.kind = IntensityKind::peak;
  else if (name == "fred") {
    s.kind = IntensityKind::fred;
    // Default three-peak shape; override per peak in the config.
    s.peaks = {FredPeak{300.0, 0.2, 0.005, 0.03, 1.0},
               FredPeak{180.0, 0.45, 0.008, 0.04, 1.0},
               FredPeak{120.0, 0.7, 0.01, 0.05, 1.0}};
  } else if (name == "constant")
    s.kind = IntensityKind::constant;
  else if (name == "tabulated")
    s.kind = IntensityKind::tabulated;
  else
    throw ConfigError("unknown intensity kind: " + name);
  return s;
}

std::string IntensitySpec::kind_name() const {
  switch (kind) {
    case IntensityKind::peak: return "peak";
    case IntensityKind::fred: return "fred";
    case IntensityKind::constant: return "constant";
    case IntensityKind::tabulated: return "tabulated";
  }
  return "?";
}

double peak_intensity(double x) {
  return std::max(1.0 - std::fabs(30.0 * (x - 0.5)), 0.1);
}

double fred_intensity(double x, const IntensitySpec& spec) {
  double f = spec.f0;
  for (const FredPeak& p : spec.peaks) {
    if (p.a < 0.0 || p.sigma_r <= 0.0 || p.sigma_d <= 0.0)
      throw ConfigError("fred peak requires a >= 0 and positive sigma_r, sigma_d");
    const double sigma = x < p.m ? p.sigma_r : p.sigma_d;
    f += p.a * std::exp(-std::fabs(x - p.m) / std::pow(sigma, p.nu));
  }
  return f;
}

double intensity_eval(const IntensitySpec& spec, double x) {
  switch (spec.kind) {
    case IntensityKind::peak: return peak_intensity(x);
    case IntensityKind::fred: return fred_intensity(x, spec);
    case IntensityKind::constant: return spec.value;
    case IntensityKind::tabulated: {
      if (spec.values.empty()) throw ConfigError("tabulated intensity requires values");
      const std::size_t n = spec.values.size();
      double w = x - std::floor(x);
      const double pos = w * double(n);
      const std::size_t i = std::min(std::size_t(pos), n - 1);
      const double frac = pos - double(i);
      return spec.values[i] * (1.0 - frac) + spec.values[(i + 1) % n] * frac;
    }
  }
  return 0.0;
}

SampledFunction sample_intensity(const IntensitySpec& spec, int J) {
  DyadicGrid grid(J);
  SampledFunction f(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) f.values[k] = intensity_eval(spec, grid.x(k));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(f.values[k] > 0.0) || !std::isfinite(f.values[k]))
      throw ConfigError("intensity must be strictly positive and bounded on the grid");
  }
  return f;
}

SampledFunction fold_intensity(const IntensitySpec& spec, const StiffnessMatrix& K) {
  return apply_operator(K, sample_intensity(spec, K.J));
}

namespace {

// ln(k!) via exact accumulation below 16 and a Stirling series above; the
// series error at x >= 17 is far below double roundoff.
double log_factorial(long long k) {
  static const double small[16] = {
      0.0,
      0.0,
      0.69314718055994530942,
      1.79175946922805500081,
      3.17805383034794561965,
      4.78749174278204599425,
      6.57925121201010099506,
      8.52516136106541430017,
      10.60460290274525022842,
      12.80182748008146961121,
      15.10441257307551529523,
      17.50230784587388583929,
      19.98721449566188614952,
      22.55216385312342288557,
      25.19122118273868150009,
      27.89927138384089156609,
  };
  if (k < 16) return small[k];
  const double x = double(k) + 1.0;
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return (x - 0.5) * std::log(x) - x + 0.91893853320467274178 +
         inv * (1.0 / 12.0 + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
}

struct UniformStream {
  std::mt19937_64 eng;
  explicit UniformStream(std::uint64_t seed) : eng(seed) {}
  // [0, 1), 53-bit
  double next() { return double(eng() >> 11) * 0x1.0p-53; }
};

long long poisson_inversion(double mean, UniformStream& u) {
  const double q = std::exp(-mean);
  double p = q, cdf = q;
  const double draw = u.next();
  long long k = 0;
  while (draw > cdf && k < 2000) {
    ++k;
    p *= mean / double(k);
    cdf += p;
  }
  return k;
}

// Hormann's PTRS transformed-rejection sampler; exact for mean >= 10.
long long poisson_ptrs(double mean, UniformStream& u) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double U = u.next() - 0.5;
    const double V = u.next();
    const double us = 0.5 - std::fabs(U);
    const double kf = std::floor((2.0 * a / us + b) * U + mean + 0.43);
    if (us >= 0.07 && V <= vr) return (long long)(kf);
    if (kf < 0.0 || (us < 0.013 && V > us)) continue;
    const long long k = (long long)(kf);
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        double(k) * loglam - mean - log_factorial(k))
      return k;
  }
}

}  // namespace

long long poisson_draw(double mean, std::uint64_t substream_seed) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw ConfigError("invalid Poisson mean");
  if (mean == 0.0) return 0;
  UniformStream u(substream_seed);
  return mean < 10.0 ? poisson_inversion(mean, u) : poisson_ptrs(mean, u);
}

CountData simulate_counts(const SampledFunction& h, double t, std::uint64_t seed) {
  if (t < 0.0 || !std::isfinite(t)) throw ConfigError("observation time t must be finite and >= 0");
  CountData data;
  data.J = h.grid.J;
  data.t = t;
  data.seed = seed;
  data.counts.resize(h.grid.size());
  const double binw = h.grid.spacing();
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    if (h.values[k] < 0.0)
      throw ConfigError("invalid intensity: negative folded value at bin " + std::to_string(k));
    data.counts[k] = poisson_draw(t * binw * h.values[k], mix_seed(seed, k));
  }
  return data;
}

void write_count_data(const CountData& data, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw IoError("cannot write counts: " + csv_path);
  out << "bin_index,count\n";
  for (std::size_t k = 0; k < data.counts.size(); ++k)
    out << k << "," << data.counts[k] << "\n";
  if (!out) throw IoError("short write on counts: " + csv_path);

  nlohmann::json side;
  side["J"] = data.J;
  side["t"] = data.t;
  side["seed"] = data.seed;
  side["kernel"] = data.kernel_key;
  if (!data.intensity_json.empty())
    side["intensity"] = nlohmann::json::parse(data.intensity_json);
  else
    side["intensity"] = nullptr;
  std::ofstream sj(csv_path + ".json", std::ios::trunc);
  if (!sj) throw IoError("cannot write counts sidecar: " + csv_path + ".json");
  sj << side.dump(2) << "\n";
}

CountData read_count_data(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot read counts: " + csv_path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("bin_index,count", 0) != 0)
    throw IoError("counts file missing bin_index,count header: " + csv_path);
  CountData data;
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed counts row: " + line);
    const long long idx = std::stoll(line.substr(0, comma));
    const long long cnt = std::stoll(line.substr(comma + 1));
    if (idx != (long long)(expect)) throw IoError("counts rows out of order in " + csv_path);
    if (cnt < 0) throw IoError("negative count in " + csv_path);
    data.counts.push_back(cnt);
    ++expect;
  }
  if (data.counts.empty()) throw IoError("counts file has no rows: " + csv_path);

  std::ifstream sj(csv_path + ".json");
  if (!sj) throw IoError("missing counts sidecar: " + csv_path + ".json");
  nlohmann::json side;
  try {
    sj >> side;
    data.J = side.at("J").get<int>();
    data.t = side.at("t").get<double>();
    data.seed = side.at("seed").get<std::uint64_t>();
    data.kernel_key = side.value("kernel", std::string());
    if (side.contains("intensity") && !side["intensity"].is_null())
      data.intensity_json = side["intensity"].dump();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad counts sidecar: ") + e.what());
  }
  if (data.counts.size() != (std::size_t(1) << data.J))
    throw IoError("counts length disagrees with sidecar J in " + csv_path);
  return data;
}

}  // namespace unfold
