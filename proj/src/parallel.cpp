#include "clfstab/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace clfstab {

void configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("CLFSTAB_THREADS")) {
    try {
      int requested = std::stoi(env);
      if (requested > 0) omp_set_num_threads(requested);
    } catch (const std::exception&) {
      // ignore malformed values, keep the OpenMP default
    }
  }
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

void omp_for(std::ptrdiff_t count, const std::function<void(std::ptrdiff_t)>& body) {
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
}

}  // namespace detail
}  // namespace clfstab
