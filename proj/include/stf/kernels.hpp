#pragma once

// Data-parallel loop kernels. Every parallel loop has a serial twin selected
// by Exec::Serial; the serial path is the reference the tests and the
// benchmark compare against. Loops write into per-index slots and any
// reduction afterwards runs in index order, so results do not depend on the
// thread schedule.

#include <cstddef>
#include <utility>

namespace stf {

enum class Exec { Serial, Parallel };

bool openmp_enabled();
int max_threads();

template <class F>
void for_each_index(Exec exec, std::size_t n, F&& body) {
  const auto count = static_cast<long long>(n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

/// Same as for_each_index with static chunking, for uniform per-index cost.
template <class F>
void for_each_index_static(Exec exec, std::size_t n, F&& body) {
  const auto count = static_cast<long long>(n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

}  // namespace stf
