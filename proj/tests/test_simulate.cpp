#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "unfold/errors.hpp"
#include "unfold/operator.hpp"
#include "unfold/simulate.hpp"

using namespace unfold;

TEST_CASE("peak intensity closed forms") {
  CHECK(peak_intensity(0.5) == doctest::Approx(1.0));
  CHECK(peak_intensity(0.49) == doctest::Approx(0.7));
  CHECK(peak_intensity(0.51) == doctest::Approx(0.7));
  CHECK(peak_intensity(0.4) == doctest::Approx(0.1));  // floor
  CHECK(peak_intensity(0.0) == doctest::Approx(0.1));
}

TEST_CASE("fred intensity closed forms") {
  IntensitySpec spec = IntensitySpec::from_name("fred");
  // Single symmetric peak: rise and decay scales equal.
  spec.f0 = 5.0;
  spec.peaks = {FredPeak{100.0, 0.5, 0.1, 0.1, 1.0}};
  CHECK(intensity_eval(spec, 0.5) == doctest::Approx(105.0));
  CHECK(intensity_eval(spec, 0.4) == doctest::Approx(5.0 + 100.0 * std::exp(-1.0)));
  CHECK(intensity_eval(spec, 0.6) == doctest::Approx(5.0 + 100.0 * std::exp(-1.0)));

  // Asymmetric scales pick rise before the mode and decay after.
  spec.peaks = {FredPeak{100.0, 0.5, 0.05, 0.2, 1.0}};
  CHECK(intensity_eval(spec, 0.45) == doctest::Approx(5.0 + 100.0 * std::exp(-1.0)));
  CHECK(intensity_eval(spec, 0.7) == doctest::Approx(5.0 + 100.0 * std::exp(-1.0)));

  // Peakedness exponent reshapes the argument: exp(-|dx| / sigma^nu).
  spec.peaks = {FredPeak{10.0, 0.5, 0.1, 0.1, 2.0}};
  CHECK(intensity_eval(spec, 0.6) ==
        doctest::Approx(5.0 + 10.0 * std::exp(-0.1 / 0.01)));

  // The shipped default triple: background plus the on-peak amplitude.
  IntensitySpec def = IntensitySpec::from_name("fred");
  CHECK(intensity_eval(def, 0.2) == doctest::Approx(320.0).epsilon(1e-6));
}

TEST_CASE("tabulated intensity interpolates periodically") {
  IntensitySpec spec = IntensitySpec::from_name("tabulated");
  spec.values = {1.0, 3.0, 5.0, 3.0};
  CHECK(intensity_eval(spec, 0.25) == doctest::Approx(3.0));
  CHECK(intensity_eval(spec, 0.125) == doctest::Approx(2.0));
  CHECK(intensity_eval(spec, 0.875) == doctest::Approx(2.0));  // wraps to values[3],values[0]
}

TEST_CASE("sample_intensity validates positivity") {
  IntensitySpec bad = IntensitySpec::from_name("tabulated");
  bad.values = {1.0, 0.0, 1.0, 1.0};
  CHECK_THROWS_AS(sample_intensity(bad, 3), ConfigError);
  IntensitySpec good = IntensitySpec::from_name("peak");
  const SampledFunction f = sample_intensity(good, 5);
  CHECK(f.values.size() == 32);
  CHECK(f.values[16] == doctest::Approx(1.0));  // x = 0.5
}

TEST_CASE("folding by a constant kernel gives the total mass") {
  KernelSpec kspec = KernelSpec::from_name("constant");
  kspec.value = 2.0;
  const StiffnessMatrix K = build_stiffness_matrix(kspec, 5, 10);
  IntensitySpec ispec = IntensitySpec::from_name("peak");
  const SampledFunction f = sample_intensity(ispec, 5);
  const SampledFunction h = fold_intensity(ispec, K);
  const double mass = integrate(f);
  for (double v : h.values) CHECK(v == doctest::Approx(2.0 * mass).epsilon(1e-10));
}

TEST_CASE("poisson sampler is exact in mean and variance") {
  // Inversion branch (mean < 10) and PTRS branch (mean >= 10).
  for (double mu : {0.3, 3.7, 25.5}) {
    const int n = 40000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = double(poisson_draw(mu, mix_seed(17, std::uint64_t(i))));
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    // 5 sigma bands on the Monte Carlo estimates.
    const double se_mean = std::sqrt(mu / n);
    const double se_var = std::sqrt((mu + 2.0 * mu * mu) * 2.0 / n);
    CHECK(std::fabs(mean - mu) < 5.0 * se_mean);
    CHECK(std::fabs(var - mu) < 5.0 * se_var);
  }
  CHECK(poisson_draw(0.0, 9) == 0);
}

TEST_CASE("simulate_counts is deterministic and scales with t") {
  SampledFunction h{DyadicGrid{4}, std::vector<double>(16, 2.0)};
  const CountData a = simulate_counts(h, 5000.0, 42);
  const CountData b = simulate_counts(h, 5000.0, 42);
  REQUIRE(a.counts.size() == 16);
  CHECK(a.counts == b.counts);
  const CountData c = simulate_counts(h, 5000.0, 43);
  CHECK(a.counts != c.counts);

  // Total ~ Poisson(t * integral h) = Poisson(10000).
  long long total = 0;
  for (long long v : a.counts) total += v;
  CHECK(std::fabs(double(total) - 10000.0) < 5.0 * std::sqrt(10000.0));

  // Degenerate cases: zero time and zero intensity bins.
  const CountData z = simulate_counts(h, 0.0, 1);
  for (long long v : z.counts) CHECK(v == 0);
  SampledFunction hz{DyadicGrid{2}, {0.0, 1.0, 0.0, 1.0}};
  const CountData z2 = simulate_counts(hz, 100.0, 1);
  CHECK(z2.counts[0] == 0);
  CHECK(z2.counts[2] == 0);

  SampledFunction neg{DyadicGrid{1}, {1.0, -0.5}};
  CHECK_THROWS_AS(simulate_counts(neg, 10.0, 1), ConfigError);
}

TEST_CASE("count data round trips through CSV plus sidecar") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("unfold_sim_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  SampledFunction h{DyadicGrid{3}, std::vector<double>(8, 4.0)};
  CountData data = simulate_counts(h, 100.0, 7);
  data.kernel_key = "test-key J=3 Q=8";
  data.intensity_json = "{\"kind\":\"constant\",\"value\":4.0}";
  const std::string path = (dir / "counts.csv").string();
  write_count_data(data, path);
  CHECK(fs::exists(dir / "counts.csv"));
  CHECK(fs::exists(dir / "counts.csv.json"));

  const CountData back = read_count_data(path);
  CHECK(back.J == 3);
  CHECK(back.t == doctest::Approx(100.0));
  CHECK(back.seed == 7);
  CHECK(back.counts == data.counts);
  CHECK(back.kernel_key == data.kernel_key);

  CHECK_THROWS_AS(read_count_data((dir / "missing.csv").string()), IoError);
  fs::remove_all(dir);
}
