#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace painscope {

/// Selects the OpenMP-parallel path or the serial reference path of a kernel.
/// Both paths produce bit-identical results.
enum class ExecPolicy { Serial, Parallel };

/// Runs body(i) for i in [0, n). Under ExecPolicy::Parallel iterations are
/// distributed with OpenMP dynamic scheduling; the first exception thrown by
/// any iteration is rethrown after the loop.
template <typename Body>
void for_each_index(std::size_t n, ExecPolicy policy, Body&& body) {
  if (policy == ExecPolicy::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace painscope
