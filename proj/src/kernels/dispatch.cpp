#include <atomic>
#include <cstdlib>
#include <string>

#include "unfold/errors.hpp"
#include "unfold/kernels.hpp"

namespace unfold::kernels {

#if defined(UNFOLD_HAVE_AVX2)
const Ops& avx2_ops();  // defined in avx2.cpp
#endif

bool avx2_available() {
#if defined(UNFOLD_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

std::atomic<const Ops*> g_forced{nullptr};

const Ops* detect() {
  if (const char* env = std::getenv("UNFOLD_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_ops();
#if defined(UNFOLD_HAVE_AVX2)
    if (want == "avx2" && avx2_available()) return &avx2_ops();
#endif
    // Unknown or unavailable request in the env var falls back to detection.
  }
#if defined(UNFOLD_HAVE_AVX2)
  if (avx2_available()) return &avx2_ops();
#endif
  return &scalar_ops();
}

}  // namespace

const Ops& active() {
  if (const Ops* f = g_forced.load(std::memory_order_acquire)) return *f;
  static const Ops* detected = detect();
  return *detected;
}

void force_backend(const std::string& name) {
  if (name == "scalar") {
    g_forced.store(&scalar_ops(), std::memory_order_release);
    return;
  }
#if defined(UNFOLD_HAVE_AVX2)
  if (name == "avx2") {
    if (!avx2_available()) throw ConfigError("avx2 kernels not supported on this CPU");
    g_forced.store(&avx2_ops(), std::memory_order_release);
    return;
  }
#endif
  if (name == "auto" || name.empty()) {
    g_forced.store(nullptr, std::memory_order_release);
    return;
  }
  throw ConfigError("unknown kernel backend: " + name);
}

}  // namespace unfold::kernels
