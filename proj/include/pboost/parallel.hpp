#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace pboost {

/// Runs body(i) for i in [0, count) on up to `workers` OpenMP threads
/// (0 = runtime default). The first exception thrown by any task is
/// rethrown after the loop. Results must be written to per-index slots so the
/// outcome does not depend on scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

/// Number of threads parallel_for would use for `workers`.
int effective_workers(int workers);

}  // namespace pboost
