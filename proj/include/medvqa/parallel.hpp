#pragma once

// Thin OpenMP layer. Every parallel kernel in the library goes through
// these helpers so that a build without OpenMP degrades to plain loops.

#include <cstddef>

#if defined(MEDVQA_HAVE_OPENMP)
#include <omp.h>
#endif

namespace medvqa::parallel {

inline int max_threads() {
#if defined(MEDVQA_HAVE_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#if defined(MEDVQA_HAVE_OPENMP)
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Runs fn(i) for i in [0, n). Iterations must be independent; fn must not throw
// (exceptions cannot cross an OpenMP region, capture them per index instead).
template <typename Fn>
void for_each_index(std::ptrdiff_t n, Fn&& fn) {
#if defined(MEDVQA_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#else
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#endif
}

// Static schedule for uniform-cost iterations (raster rows).
template <typename Fn>
void for_each_row(std::ptrdiff_t n, Fn&& fn) {
#if defined(MEDVQA_HAVE_OPENMP)
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#else
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace medvqa::parallel
