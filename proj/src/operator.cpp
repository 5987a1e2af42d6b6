#include "unfold/operator.hpp"

#include <fftw3.h>

#include <Eigen/Eigenvalues>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "unfold/errors.hpp"

namespace unfold {

KernelSpec KernelSpec::from_name(const std::string& name) {
  KernelSpec s;
  if (name == "log-potential-periodized")
    s.kind = KernelKind::log_potential_periodized;
  else if (name == "log-potential-literal")
    s.kind = KernelKind::log_potential_literal;
  else if (name == "constant")
    s.kind = KernelKind::constant;
  else if (name == "tabulated")
    s.kind = KernelKind::tabulated;
  else
    throw ConfigError("unknown kernel kind: " + name);
  return s;
}

std::string KernelSpec::kind_name() const {
  switch (kind) {
    case KernelKind::log_potential_periodized: return "log-potential-periodized";
    case KernelKind::log_potential_literal: return "log-potential-literal";
    case KernelKind::constant: return "constant";
    case KernelKind::tabulated: return "tabulated";
  }
  return "?";
}

std::string KernelSpec::key(int J, int quad_resolution) const {
  std::ostringstream os;
  os << kind_name();
  if (kind == KernelKind::constant) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    os << " value=" << buf;
  } else if (kind == KernelKind::tabulated) {
    // Content hash so distinct tables never collide in the cache.
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : profile) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof v);
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
    os << " profile=" << std::hex << h << std::dec << "/" << profile.size();
  }
  os << " J=" << J << " Q=" << quad_resolution;
  return os.str();
}

double KernelSpec::profile_at(double u) const {
  switch (kind) {
    case KernelKind::log_potential_periodized: {
      const double s = std::fabs(std::sin(M_PI * u));
      if (s == 0.0) throw Error("log-potential kernel evaluated on the singular diagonal");
      return -std::log(0.5 * s);
    }
    case KernelKind::log_potential_literal: {
      const double s = std::fabs(std::sin(0.5 * u));
      if (s == 0.0) throw Error("log-potential kernel evaluated on the singular diagonal");
      return -std::log(0.5 * s);
    }
    case KernelKind::constant:
      return value;
    case KernelKind::tabulated: {
      if (profile.empty()) throw ConfigError("tabulated kernel requires a nonempty profile");
      const std::size_t n = profile.size();
      double w = u - std::floor(u);
      const double pos = w * double(n);
      const std::size_t i = std::min(std::size_t(pos), n - 1);
      const double frac = pos - double(i);
      return profile[i] * (1.0 - frac) + profile[(i + 1) % n] * frac;
    }
  }
  return 0.0;
}

double kernel_eval(const KernelSpec& spec, double x, double y) {
  if (spec.singular() && x == y)
    throw Error("kernel_eval on the singular diagonal (x = y)");
  return spec.profile_at(x - y);
}

Eigen::MatrixXd StiffnessMatrix::dense() const {
  const std::size_t n = first_row.size();
  Eigen::MatrixXd M(n, n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t k = 0; k < n; ++k) M(l, k) = entry(l, k);
  return M;
}

StiffnessMatrix build_stiffness_matrix(const KernelSpec& spec, int J, int quad_resolution) {
  if (J < 0 || J > 20) throw ConfigError("stiffness J out of range");
  if (quad_resolution < J + 2)
    throw ConfigError("quad_resolution must be at least J + 2 (4 cells per bin side)");
  if (quad_resolution > 26) throw ConfigError("quad_resolution too large");

  const std::size_t n = std::size_t(1) << J;
  const long m = 1L << (quad_resolution - J);  // y-cells per bin; x uses 2m finer cells
  const double cell = std::ldexp(1.0, -(quad_resolution + 2));
  const double weight = std::ldexp(1.0, J - 2 * quad_resolution - 1);

  StiffnessMatrix K;
  K.J = J;
  K.quad_resolution = quad_resolution;
  K.circulant = spec.circulant();
  K.key = spec.key(J, quad_resolution);
  K.first_row.resize(n);

  // Entry(0,k) = 2^J sum over x in B_k (midpoints at scale 2^-(Q+1)) and
  // y in B_0 (midpoints at scale 2^-Q) of h(x - y). Collapsing the double
  // sum over the difference s = q - 2p leaves O(m) kernel evaluations per
  // entry; the offsets (2s-1)2^-(Q+2) are odd multiples of the sub-cell, so
  // the singular diagonal is never sampled, and the multiplicity count(s)
  // is symmetric under s -> 1-s, which makes the matrix exactly symmetric.
  for (std::size_t k = 0; k < n; ++k) {
    const double base = double(k) / double(n);
    double acc = 0.0;
    for (long s = -(2 * m - 2); s <= 2 * m - 1; ++s) {
      // p range: max(0, ceil(-s/2)) .. min(m-1, floor((2m-s-1)/2))
      const long p_lo = std::max(0L, (-s + 1) / 2);
      const long p_hi = std::min(m - 1, (2 * m - s - 1) / 2);
      if (p_hi < p_lo) continue;
      const double count = double(p_hi - p_lo + 1);
      const double u = base + double(2 * s - 1) * cell;
      acc += count * spec.profile_at(u);
    }
    K.first_row[k] = weight * acc;
  }
  return K;
}

namespace {

// FFTW plans are cached per length; plan creation is not thread-safe, and at
// these sizes the transform is microseconds, so the whole apply runs under
// one mutex.
struct FftCache {
  std::mutex mu;
  struct Entry {
    fftw_plan fwd = nullptr, inv = nullptr;
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    std::size_t n = 0;
  };
  std::map<std::size_t, Entry> entries;

  Entry& get(std::size_t n) {
    auto it = entries.find(n);
    if (it != entries.end()) return it->second;
    Entry e;
    e.n = n;
    e.real = fftw_alloc_real(n);
    e.spec = fftw_alloc_complex(n / 2 + 1);
    e.fwd = fftw_plan_dft_r2c_1d(int(n), e.real, e.spec, FFTW_ESTIMATE);
    e.inv = fftw_plan_dft_c2r_1d(int(n), e.spec, e.real, FFTW_ESTIMATE);
    if (!e.fwd || !e.inv) throw SolverError("fftw plan creation failed");
    return entries.emplace(n, e).first->second;
  }
};

FftCache& fft_cache() {
  static FftCache* c = new FftCache;  // leaked intentionally; plans live for the process
  return *c;
}

}  // namespace

SampledFunction apply_operator(const StiffnessMatrix& K, const SampledFunction& f) {
  const std::size_t n = K.first_row.size();
  if (std::size_t(f.grid.size()) != n || f.grid.J != K.J)
    throw ConfigError("apply_operator resolution mismatch");

  SampledFunction out{DyadicGrid(K.J)};
  if (!K.circulant) {
    // Symmetric Toeplitz: dense accumulation (n <= 2^20 is out of scope here).
    for (std::size_t l = 0; l < n; ++l) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += K.entry(l, k) * f.values[k];
      out.values[l] = acc;
    }
    return out;
  }

  // y_l = sum_k r[(k-l) mod n] v_k: cyclic cross-correlation, via conj(R).V.
  auto& cache = fft_cache();
  std::lock_guard<std::mutex> lock(cache.mu);
  auto& e = cache.get(n);
  const std::size_t nc = n / 2 + 1;
  std::vector<std::complex<double>> R(nc);

  std::copy(K.first_row.begin(), K.first_row.end(), e.real);
  fftw_execute(e.fwd);
  for (std::size_t i = 0; i < nc; ++i) R[i] = {e.spec[i][0], e.spec[i][1]};

  std::copy(f.values.begin(), f.values.end(), e.real);
  fftw_execute(e.fwd);
  for (std::size_t i = 0; i < nc; ++i) {
    const std::complex<double> v{e.spec[i][0], e.spec[i][1]};
    const std::complex<double> y = std::conj(R[i]) * v;
    e.spec[i][0] = y.real();
    e.spec[i][1] = y.imag();
  }
  fftw_execute(e.inv);
  const double scale = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = e.real[i] * scale;
  return out;
}

Eigen::VectorXd GalerkinMatrix::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = llt.solve(rhs);
  x += llt.solve(rhs - M * x);
  return x;
}

GalerkinMatrix make_galerkin(int j, Eigen::MatrixXd M) {
  GalerkinMatrix G;
  G.j = j;
  G.M = std::move(M);
  G.llt.compute(G.M);
  if (G.llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G.M, Eigen::EigenvaluesOnly);
    const double lam = es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                                   : std::nan("");
    std::ostringstream os;
    os << "ill-posed discretization: Galerkin matrix at j=" << j
       << " is not positive definite (min eigenvalue ~ " << lam << ")";
    throw SolverError(os.str());
  }
  return G;
}

GalerkinMatrix wavelet_galerkin_matrix(const StiffnessMatrix& K, const WaveletFilter& filter,
                                       int j) {
  if (j < 0 || j > K.J) throw ConfigError("Galerkin level j must lie in [0, J]");
  const std::size_t n = K.first_row.size();
  const std::size_t nj = std::size_t(1) << j;

  Eigen::MatrixXd A = K.dense();
  std::vector<double> buf(n);
  // Transform rows, then columns: W K_J W^T.
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) buf[c] = A(r, c);
    forward_transform(buf, filter);
    for (std::size_t c = 0; c < n; ++c) A(r, c) = buf[c];
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < n; ++r) buf[r] = A(r, c);
    forward_transform(buf, filter);
    for (std::size_t r = 0; r < n; ++r) A(r, c) = buf[r];
  }
  Eigen::MatrixXd M = A.topLeftCorner(nj, nj);
  M = 0.5 * (M + M.transpose()).eval();
  return make_galerkin(j, std::move(M));
}

GalerkinWavelet galerkin_wavelet(const GalerkinMatrix& Kj, WaveletIndex lambda) {
  const std::size_t flat = flat_index(lambda);
  if (flat >= std::size_t(Kj.M.rows()))
    throw ConfigError("galerkin_wavelet index outside {|lambda| < j}");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(Kj.M.rows());
  e[flat] = 1.0;
  return GalerkinWavelet{lambda, Kj.solve(e)};
}

std::pair<double, double> ellipticity_diagnostic(const GalerkinMatrix& Kj, double nu,
                                                 int samples, std::uint64_t seed) {
  if (nu <= 0.0) throw ConfigError("ellipticity diagnostic requires nu > 0");
  const std::size_t nj = Kj.M.rows();
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd a(nj);
    for (std::size_t i = 0; i < nj; ++i) a[i] = gauss(eng);
    double denom = 0.0;
    for (std::size_t i = 0; i < nj; ++i)
      denom += std::pow(2.0, -nu * effective_level(i)) * a[i] * a[i];
    const double ratio = a.dot(Kj.M * a) / denom;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo, hi};
}

void save_stiffness(const StiffnessMatrix& K, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write stiffness cache: " + path);
  out << K.key << "\n";
  char buf[40];
  for (double v : K.first_row) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << "\n";
  }
  if (!out) throw IoError("short write on stiffness cache: " + path);
}

StiffnessMatrix load_stiffness(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read stiffness cache: " + path);
  StiffnessMatrix K;
  if (!std::getline(in, K.key)) throw IoError("stiffness cache missing key line: " + path);

  // Recover J/Q/kind from the key (format written by KernelSpec::key).
  std::istringstream ks(K.key);
  std::string kind_name, tok;
  ks >> kind_name;
  int J = -1, Q = -1;
  while (ks >> tok) {
    if (tok.rfind("J=", 0) == 0) J = std::stoi(tok.substr(2));
    if (tok.rfind("Q=", 0) == 0) Q = std::stoi(tok.substr(2));
  }
  if (J < 0 || Q < 0) throw IoError("stiffness cache has malformed key: " + K.key);
  K.J = J;
  K.quad_resolution = Q;
  K.circulant = kind_name != "log-potential-literal";

  const std::size_t n = std::size_t(1) << J;
  K.first_row.reserve(n);
  double v;
  while (in >> v) K.first_row.push_back(v);
  if (K.first_row.size() != n)
    throw IoError("stiffness cache row count mismatch in " + path);
  return K;
}

StiffnessMatrix cached_stiffness(const KernelSpec& spec, int J, int quad_resolution,
                                 const std::string& cache_dir) {
  if (cache_dir.empty()) return build_stiffness_matrix(spec, J, quad_resolution);
  const std::string key = spec.key(J, quad_resolution);
  std::string fname = key;
  for (char& c : fname)
    if (c == ' ' || c == '/' || c == '=') c = '_';
  const std::filesystem::path path = std::filesystem::path(cache_dir) / (fname + ".cache");
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    StiffnessMatrix K = load_stiffness(path.string());
    if (K.key == key) return K;
  }
  StiffnessMatrix K = build_stiffness_matrix(spec, J, quad_resolution);
  std::filesystem::create_directories(cache_dir, ec);
  save_stiffness(K, path.string());
  return K;
}

}  // namespace unfold
