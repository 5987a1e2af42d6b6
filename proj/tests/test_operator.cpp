#include <doctest.h>

#include <Eigen/Dense>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "unfold/errors.hpp"
#include "unfold/operator.hpp"
#include "unfold/wavelet.hpp"

using namespace unfold;

namespace {

const double kLog2 = std::log(2.0);

KernelSpec periodized() { return KernelSpec::from_name("log-potential-periodized"); }
KernelSpec literal() { return KernelSpec::from_name("log-potential-literal"); }

// Independent quadrature: same staggered midpoint rule, written as the naive
// double loop over both sub-grids instead of the shift-grouped scan.
std::vector<double> brute_force_first_row(const KernelSpec& spec, int J, int Q) {
  const std::size_t n = std::size_t(1) << J;
  const long m = 1L << (Q - J);
  const double wy = std::pow(2.0, -Q);
  const double wx = std::pow(2.0, -(Q + 1));
  const double weight = std::pow(2.0, double(J)) * wy * wx;
  std::vector<double> row(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (long p = 0; p < m; ++p) {
      const double y = wy * (p + 0.5);
      for (long q = 0; q < 2 * m; ++q) {
        const double x = double(k) / double(n) + wx * (q + 0.5);
        acc += spec.profile_at(x - y);
      }
    }
    row[k] = acc * weight;
  }
  return row;
}

}  // namespace

TEST_CASE("kernel evaluation closed forms") {
  CHECK(kernel_eval(periodized(), 0.25, 0.75) == doctest::Approx(kLog2).epsilon(1e-12));
  CHECK(kernel_eval(literal(), 0.25, 0.75) ==
        doctest::Approx(-std::log(0.5 * std::sin(0.25))).epsilon(1e-12));
  CHECK(kernel_eval(literal(), 0.25, 0.75) == doctest::Approx(2.0900).epsilon(1e-4));

  // Symmetry and periodicity.
  CHECK(kernel_eval(periodized(), 0.1, 0.4) ==
        doctest::Approx(kernel_eval(periodized(), 0.4, 0.1)).epsilon(1e-14));
  CHECK(kernel_eval(periodized(), 0.1, 0.4) ==
        doctest::Approx(kernel_eval(periodized(), 0.1 + 1.0, 0.4)).epsilon(1e-12));

  CHECK_THROWS_AS(kernel_eval(periodized(), 0.3, 0.3), Error);

  KernelSpec c = KernelSpec::from_name("constant");
  c.value = 3.5;
  CHECK(kernel_eval(c, 0.12, 0.93) == doctest::Approx(3.5));

  KernelSpec tab = KernelSpec::from_name("tabulated");
  tab.profile = {1.0, 2.0, 3.0, 2.0};
  CHECK(kernel_eval(tab, 0.25, 0.0) == doctest::Approx(2.0));   // u = x - y = 1/4
  CHECK(kernel_eval(tab, 0.125, 0.0) == doctest::Approx(1.5));  // halfway interpolation
  CHECK(kernel_eval(tab, 0.0, 0.125) == doctest::Approx(1.5));  // periodic wrap of -1/8

  CHECK_THROWS_AS(KernelSpec::from_name("gaussian"), ConfigError);
}

TEST_CASE("constant kernel stiffness entries are value times 2^-J") {
  for (int J : {3, 5, 8}) {
    KernelSpec spec = KernelSpec::from_name("constant");
    spec.value = 2.0;
    const StiffnessMatrix K = build_stiffness_matrix(spec, J, J + 3);
    CHECK(K.circulant);
    CHECK(int(K.size()) == (1 << J));
    for (double v : K.first_row)
      CHECK(std::fabs(v - 2.0 * std::pow(2.0, -J)) <= 1e-10);
  }
}

TEST_CASE("stiffness quadrature matches the naive double loop") {
  for (const KernelSpec& spec : {periodized(), literal()}) {
    const int J = 3, Q = 7;
    const StiffnessMatrix K = build_stiffness_matrix(spec, J, Q);
    const std::vector<double> want = brute_force_first_row(spec, J, Q);
    REQUIRE(K.first_row.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k)
      CHECK(K.first_row[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
}

TEST_CASE("stiffness matrix is symmetric and positive definite") {
  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 6, 12);
  const Eigen::MatrixXd D = K.dense();
  // Circulant entries m and n-m come from independent quadrature loops, so the
  // even kernel yields symmetry only up to summation roundoff.
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  const StiffnessMatrix L = build_stiffness_matrix(literal(), 4, 8);
  CHECK_FALSE(L.circulant);
  const Eigen::MatrixXd DL = L.dense();
  CHECK((DL - DL.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("operator application: closed form, FFT path, convergence") {
  // f = 1 under the periodized log kernel integrates to 2 log 2.
  const int J = 5;
  SampledFunction one{DyadicGrid{J}, std::vector<double>(std::size_t(1) << J, 1.0)};
  double prev_err = 0.0;
  for (int Q : {10, 14}) {
    const StiffnessMatrix K = build_stiffness_matrix(periodized(), J, Q);
    const SampledFunction h = apply_operator(K, one);
    double err = 0.0;
    for (double v : h.values) err = std::max(err, std::fabs(v - 2.0 * kLog2));
    if (Q == 10) {
      prev_err = err;
      CHECK(err < 1e-2);
    } else {
      CHECK(err < prev_err);
      CHECK(err < 1e-3);
    }
  }

  // FFT application equals the dense matrix-vector product.
  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 7, 12);
  SampledFunction f{DyadicGrid{7}};
  f.values.resize(128);
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> dist(-1.0, 2.0);
  for (double& v : f.values) v = dist(eng);
  const SampledFunction fast = apply_operator(K, f);
  const Eigen::VectorXd vf =
      Eigen::Map<const Eigen::VectorXd>(f.values.data(), Eigen::Index(f.values.size()));
  const Eigen::VectorXd slow = K.dense() * vf;
  for (std::size_t k = 0; k < f.values.size(); ++k)
    CHECK(fast.values[k] == doctest::Approx(slow[k]).epsilon(1e-12));

  // Non-circulant route agrees with its dense form too.
  const StiffnessMatrix KL = build_stiffness_matrix(literal(), 4, 9);
  SampledFunction g{DyadicGrid{4}, std::vector<double>(16, 1.0)};
  const SampledFunction hl = apply_operator(KL, g);
  const Eigen::VectorXd vg = Eigen::VectorXd::Ones(16);
  const Eigen::VectorXd wl = KL.dense() * vg;
  for (std::size_t k = 0; k < 16; ++k)
    CHECK(hl.values[k] == doctest::Approx(wl[k]).epsilon(1e-12));
}

TEST_CASE("stiffness preconditions") {
  CHECK_THROWS_AS(build_stiffness_matrix(periodized(), 6, 7), Error);  // Q < J+2
  KernelSpec tab = KernelSpec::from_name("tabulated");
  CHECK_THROWS_AS(build_stiffness_matrix(tab, 4, 8), Error);  // empty profile
}

TEST_CASE("galerkin matrix identity and exactness") {
  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 6, 12);
  const WaveletFilter sym = WaveletFilter::from_name("symmlet6");
  for (int j : {0, 2, 4}) {
    const GalerkinMatrix Kj = wavelet_galerkin_matrix(K, sym, j);
    const std::size_t p = std::size_t(1) << j;
    REQUIRE(Kj.M.rows() == Eigen::Index(p));
    CHECK((Kj.M - Kj.M.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t lam = 0; lam < p; ++lam) {
      const GalerkinWavelet u = galerkin_wavelet(Kj, index_of(lam));
      Eigen::VectorXd r = Kj.M * u.U;
      r[Eigen::Index(lam)] -= 1.0;
      CHECK(r.cwiseAbs().maxCoeff() <= 1e-10);
    }
    // Exactness: solving the image of a known vector returns it.
    Eigen::VectorXd alpha(p);
    for (std::size_t i = 0; i < p; ++i) alpha[Eigen::Index(i)] = std::sin(1.0 + double(i));
    const Eigen::VectorXd back = Kj.solve(Kj.M * alpha);
    CHECK((back - alpha).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("galerkin matrix agrees with direct basis quadrature") {
  // Entry (lam, kap) = <K psi_kap, psi_lam> computed from synthesized basis
  // vectors against the dense scaling-basis matrix.
  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 5, 11);
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  const int j = 3;
  const std::size_t p = 8, n = 32;
  const GalerkinMatrix Kj = wavelet_galerkin_matrix(K, haar, j);
  Eigen::MatrixXd B(p, n);
  for (std::size_t i = 0; i < p; ++i) {
    const SampledFunction psi = basis_function(index_of(i), haar, 5);
    for (std::size_t k = 0; k < n; ++k) B(Eigen::Index(i), Eigen::Index(k)) = psi.values[k];
  }
  // K_J holds <K phi_l, phi_k>; psi = sum_k psi(x_k) 2^{-J/2} phi_k exactly for
  // Haar, so the wavelet entries are B K_J B^T scaled by 2^{-J}.
  const Eigen::MatrixXd direct = B * K.dense() * B.transpose() / double(n);
  CHECK((Kj.M - direct).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("2x2 hand inversion") {
  Eigen::MatrixXd M(2, 2);
  M << 2.0, 1.0, 1.0, 2.0;
  const GalerkinMatrix Kj = make_galerkin(1, M);
  const GalerkinWavelet u = galerkin_wavelet(Kj, index_of(0));
  CHECK(u.U[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(u.U[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("constant kernel collapses to the coarse slot") {
  KernelSpec spec = KernelSpec::from_name("constant");
  spec.value = 3.0;
  const StiffnessMatrix K = build_stiffness_matrix(spec, 5, 10);
  const WaveletFilter haar = WaveletFilter::from_name("haar");
  const GalerkinMatrix K0 = wavelet_galerkin_matrix(K, haar, 0);
  CHECK(K0.M(0, 0) == doctest::Approx(3.0).epsilon(1e-10));
  // At j >= 1 the matrix is rank one, so the factorization must refuse.
  CHECK_THROWS_AS(wavelet_galerkin_matrix(K, haar, 2), SolverError);
}

TEST_CASE("ellipticity diagnostic brackets a positive band") {
  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 6, 12);
  const WaveletFilter sym = WaveletFilter::from_name("symmlet6");
  const GalerkinMatrix Kj = wavelet_galerkin_matrix(K, sym, 5);
  const auto [lo, hi] = ellipticity_diagnostic(Kj, 1.0, 100);
  CHECK(lo > 0.0);
  CHECK(hi >= lo);
  // Deterministic for a fixed seed.
  const auto [lo2, hi2] = ellipticity_diagnostic(Kj, 1.0, 100);
  CHECK(lo == lo2);
  CHECK(hi == hi2);
}

TEST_CASE("stiffness cache round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("unfold_cache_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  const StiffnessMatrix K = build_stiffness_matrix(periodized(), 4, 9);
  const std::string file = (dir / "k.cache").string();
  save_stiffness(K, file);
  const StiffnessMatrix L = load_stiffness(file);
  CHECK(L.key == K.key);
  CHECK(L.J == K.J);
  CHECK(L.quad_resolution == K.quad_resolution);
  CHECK(L.circulant == K.circulant);
  REQUIRE(L.first_row.size() == K.first_row.size());
  for (std::size_t i = 0; i < K.first_row.size(); ++i)
    CHECK(L.first_row[i] == K.first_row[i]);  // %.17g round-trips doubles

  const StiffnessMatrix C1 = cached_stiffness(periodized(), 4, 9, dir.string());
  const StiffnessMatrix C2 = cached_stiffness(periodized(), 4, 9, dir.string());
  CHECK(C1.key == K.key);
  for (std::size_t i = 0; i < K.first_row.size(); ++i) {
    CHECK(C1.first_row[i] == K.first_row[i]);
    CHECK(C2.first_row[i] == K.first_row[i]);
  }
  fs::remove_all(dir);
}
