#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <vector>

namespace clfstab {

// Every batch kernel (region sweeps, probe targets, experiment cells) has a
// serial reference path and an OpenMP path. Results are written by index, so
// both paths produce identical output.
enum class Execution { Serial, Parallel };

// Caps the OpenMP team size from CLFSTAB_THREADS when set. Idempotent.
void configure_threads_from_env();
int max_threads();

namespace detail {
void omp_for(std::ptrdiff_t count, const std::function<void(std::ptrdiff_t)>& body);
}

// Runs body(i) for i in [0, count). The first exception thrown by any
// iteration is rethrown after the loop; later iterations still run.
template <typename Body>
void for_each_index(std::size_t count, Execution exec, Body&& body) {
  if (exec == Execution::Serial || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  std::mutex guard;
  detail::omp_for(static_cast<std::ptrdiff_t>(count), [&](std::ptrdiff_t i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!first) first = std::current_exception();
    }
  });
  if (first) std::rethrow_exception(first);
}

// Index-ordered map: out[i] = fn(i).
template <typename T, typename Fn>
std::vector<T> map_indices(std::size_t count, Execution exec, Fn&& fn) {
  std::vector<T> out(count);
  for_each_index(count, exec, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace clfstab
