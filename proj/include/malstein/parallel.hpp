#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace malstein {

int max_threads();
void set_threads(int n);

// Parallel loop over [0, n). body(i) must write only to slots owned by i;
// final reductions are done serially by the caller so results are identical
// for every thread count, including 1.
template <class F>
void parallel_for(std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

// Same slot discipline, but each worker gets its own scratch object from
// make() (e.g. FFT buffers); body(ws, i) may mutate ws freely.
template <class Make, class F>
void parallel_for_with(std::ptrdiff_t n, Make&& make, F&& body) {
#ifdef _OPENMP
#pragma omp parallel
  {
    auto ws = make();
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(ws, i);
  }
#else
  auto ws = make();
  for (std::ptrdiff_t i = 0; i < n; ++i) body(ws, i);
#endif
}

}  // namespace malstein
