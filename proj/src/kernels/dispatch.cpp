#include <cstdlib>
#include <string_view>

#include "eprlock/kernels.hpp"
#include "kernels/detail.hpp"

namespace eprlock::kernels {

const KernelTable* avx2() {
#if defined(EPRLOCK_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon() {
#if defined(EPRLOCK_HAVE_NEON)
  // Advanced SIMD is mandatory on AArch64.
  return &detail::neon_table();
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* forced = std::getenv("EPRLOCK_KERNELS");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar();
    if (const KernelTable* table = avx2()) return *table;
    if (const KernelTable* table = neon()) return *table;
    return scalar();
  }();
  return chosen;
}

}  // namespace eprlock::kernels
