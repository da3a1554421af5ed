#pragma once

// Include this instead of <omp.h>; builds without OpenMP fall back to serial.

#if defined(_OPENMP)
#include <omp.h>
namespace photoread::par {
constexpr bool kHaveOpenMP = true;
inline int max_threads() { return omp_get_max_threads(); }
inline void set_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }
}  // namespace photoread::par
#else
namespace photoread::par {
constexpr bool kHaveOpenMP = false;
inline int max_threads() { return 1; }
inline void set_threads(int) {}
}  // namespace photoread::par
#endif
