#pragma once

#include "eprlock/kernels.hpp"

namespace eprlock::kernels::detail {

#if defined(EPRLOCK_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(EPRLOCK_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace eprlock::kernels::detail
