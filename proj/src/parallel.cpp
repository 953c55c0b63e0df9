#include "pboost/parallel.hpp"

#include <mutex>

#include <omp.h>

namespace pboost {

int effective_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  // The failure of the lowest index is reported, independent of scheduling.
  std::exception_ptr failure;
  std::ptrdiff_t failed_at = -1;
  std::mutex failure_mutex;
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(effective_workers(workers))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (failed_at < 0 || i < failed_at) {
        failure = std::current_exception();
        failed_at = i;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pboost
