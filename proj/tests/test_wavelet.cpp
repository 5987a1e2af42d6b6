#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "unfold/errors.hpp"
#include "unfold/grid.hpp"
#include "unfold/wavelet.hpp"

using namespace unfold;

namespace {

SampledFunction random_function(int J, std::uint64_t seed) {
  SampledFunction f{DyadicGrid{J}};
  f.values.resize(f.grid.size());
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : f.values) v = dist(eng);
  return f;
}

}  // namespace

TEST_CASE("filter construction and quadrature mirror relation") {
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  CHECK(haar.taps() == 2);
  CHECK(haar.lo[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(haar.hi[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(haar.hi[1] == doctest::Approx(-1.0 / std::sqrt(2.0)));

  const WaveletFilter sym = WaveletFilter::from_name("symmlet6");
  CHECK(sym.taps() == 12);
  CHECK(sym.vanishing_moments == 6);
  CHECK(WaveletFilter::from_name("sym6").name == sym.name);
  CHECK_THROWS_AS(WaveletFilter::from_name("db4"), ConfigError);

  for (const WaveletFilter* f : {&haar, &sym}) {
    // Unit norm, sum sqrt(2), double-shift orthogonality, and the mirror
    // construction g_m = (-1)^m h_{L-1-m}.
    double sum = 0.0, norm = 0.0;
    for (double h : f->lo) {
      sum += h;
      norm += h * h;
    }
    CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    const std::size_t L = f->taps();
    for (std::size_t shift = 2; shift < L; shift += 2) {
      double dot = 0.0;
      for (std::size_t m = 0; m + shift < L; ++m) dot += f->lo[m] * f->lo[m + shift];
      CHECK(std::fabs(dot) < 1e-12);
    }
    for (std::size_t m = 0; m < L; ++m) {
      const double want = (m % 2 == 0 ? 1.0 : -1.0) * f->lo[L - 1 - m];
      CHECK(f->hi[m] == doctest::Approx(want));
    }
  }
}

TEST_CASE("symmlet6 has six discrete vanishing moments") {
  const WaveletFilter sym = WaveletFilter::from_name("symmlet6");
  for (int p = 0; p < 6; ++p) {
    double moment = 0.0, scale = 0.0;
    for (std::size_t m = 0; m < sym.taps(); ++m) {
      moment += sym.hi[m] * std::pow(double(m), p);
      scale += std::fabs(sym.hi[m]) * std::pow(double(m), p);
    }
    CHECK(std::fabs(moment) <= 1e-7 * std::max(scale, 1.0));
  }
}

TEST_CASE("haar transform of hand vectors") {
  // Constant 1 on J=2: all mass in the coarse slot, mass = integral = 1.
  SampledFunction c{DyadicGrid{2}, {1.0, 1.0, 1.0, 1.0}};
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  const WaveletCoefficients w = dwt_forward(c, haar);
  CHECK(w.coeffs[0] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::fabs(w.coeffs[i]) < 1e-15);

  // J=1 values (2,0): coarse 1, detail (even-odd) positive 1.
  SampledFunction two{DyadicGrid{1}, {2.0, 0.0}};
  const WaveletCoefficients w2 = dwt_forward(two, haar);
  CHECK(w2.coeffs[0] == doctest::Approx(1.0));
  CHECK(w2.coeffs[1] == doctest::Approx(1.0));
}

TEST_CASE("basis functions: coarse is constant, haar mother is a step") {
  for (const char* name : {"haar", "symmlet6"}) {
    const WaveletFilter filter = WaveletFilter::from_name(name);
    const SampledFunction phi = basis_function(WaveletIndex{-1, 0}, filter, 5);
    // Published symmlet6 taps satisfy the orthonormality conditions to ~1e-13,
    // so multi-level synthesis of a constant is flat only to ~1e-11.
    for (double v : phi.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
  }
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  const SampledFunction psi = basis_function(WaveletIndex{0, 0}, haar, 2);
  CHECK(psi.values[0] == doctest::Approx(1.0));
  CHECK(psi.values[1] == doctest::Approx(1.0));
  CHECK(psi.values[2] == doctest::Approx(-1.0));
  CHECK(psi.values[3] == doctest::Approx(-1.0));
  // Translation: position 1 at level 1, J=2 lives on the last quarter.
  const SampledFunction psi11 = basis_function(WaveletIndex{1, 1}, haar, 2);
  CHECK(psi11.values[0] == doctest::Approx(0.0));
  CHECK(psi11.values[1] == doctest::Approx(0.0));
  CHECK(psi11.values[2] == doctest::Approx(std::sqrt(2.0)));
  CHECK(psi11.values[3] == doctest::Approx(-std::sqrt(2.0)));
}

TEST_CASE("round trip and Parseval across resolutions and filters") {
  for (const char* name : {"haar", "symmlet6"}) {
    const WaveletFilter filter = WaveletFilter::from_name(name);
    for (int J = 1; J <= 10; ++J) {
      const SampledFunction f = random_function(J, 40 + J);
      const WaveletCoefficients w = dwt_forward(f, filter);
      const SampledFunction back = dwt_inverse(w, filter);
      long double sum_v = 0.0, sum_c = 0.0;
      double max_err = 0.0;
      for (std::size_t k = 0; k < f.values.size(); ++k) {
        max_err = std::max(max_err, std::fabs(f.values[k] - back.values[k]));
        sum_v += (long double)(f.values[k]) * f.values[k];
        sum_c += (long double)(w.coeffs[k]) * w.coeffs[k];
      }
      sum_v *= f.grid.spacing();
      CHECK(max_err <= 1e-10);
      CHECK(std::fabs(double(sum_c - sum_v)) <= 1e-10 * std::max(1.0, double(sum_v)));
    }
  }
}

TEST_CASE("synthesized basis is orthonormal") {
  const DyadicGrid grid{7};
  for (const char* name : {"haar", "symmlet6"}) {
    const WaveletFilter filter = WaveletFilter::from_name(name);
    const std::size_t p = 8;
    std::vector<SampledFunction> basis;
    for (std::size_t i = 0; i < p; ++i)
      basis.push_back(basis_function(index_of(i), filter, grid.J));
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        double dot = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
          dot += basis[a].values[k] * basis[b].values[k];
        dot *= grid.spacing();
        CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
    }
  }
}

TEST_CASE("index maps between flat layout and (level, position)") {
  CHECK(flat_index(WaveletIndex{-1, 0}) == 0);
  CHECK(flat_index(WaveletIndex{0, 0}) == 1);
  CHECK(flat_index(WaveletIndex{1, 0}) == 2);
  CHECK(flat_index(WaveletIndex{1, 1}) == 3);
  CHECK(flat_index(WaveletIndex{3, 5}) == 13);
  for (std::size_t i = 0; i < 64; ++i) {
    const WaveletIndex idx = index_of(i);
    CHECK(flat_index(idx) == i);
  }
  CHECK(effective_level(0) == 0);
  CHECK(effective_level(1) == 0);
  CHECK(effective_level(flat_index(WaveletIndex{4, 3})) == 4);
}

TEST_CASE("projection zeroes fine levels only") {
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  const SampledFunction f = random_function(4, 99);
  const WaveletCoefficients w = dwt_forward(f, haar);
  const WaveletCoefficients pw = project(w, 2);
  for (std::size_t i = 0; i < w.coeffs.size(); ++i) {
    if (i < 4)
      CHECK(pw.coeffs[i] == w.coeffs[i]);
    else
      CHECK(pw.coeffs[i] == 0.0);
  }
  // Projection is idempotent and self-adjoint in sequence space by shape.
  const WaveletCoefficients pw2 = project(pw, 2);
  for (std::size_t i = 0; i < w.coeffs.size(); ++i) CHECK(pw2.coeffs[i] == pw.coeffs[i]);
}

TEST_CASE("Besov sequence norm closed forms") {
  // Single coarse coefficient: every (s,p,q) norm equals its magnitude.
  WaveletCoefficients w(3);
  w.coeffs[0] = 2.5;
  CHECK(besov_seq_norm(w, 1.0, 2.0, 2.0) == doctest::Approx(2.5));
  CHECK(besov_seq_norm(w, 0.5, 1.0, std::numeric_limits<double>::infinity()) ==
        doctest::Approx(2.5));

  // Single level-2 coefficient, s=1, p=q=2, d=1: weight 2^{js} = 4.
  WaveletCoefficients w2(3);
  w2.coeffs[flat_index(WaveletIndex{2, 1})] = 1.0;
  CHECK(besov_seq_norm(w2, 1.0, 2.0, 2.0) == doctest::Approx(4.0));

  // p=1 adds d(1/2-1/p) = -1/2 to the exponent: weight 2^{j/2} = 2.
  CHECK(besov_seq_norm(w2, 1.0, 1.0, 1.0) == doctest::Approx(2.0));
}
