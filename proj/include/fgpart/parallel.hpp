#pragma once

#include <cstddef>
#include <functional>

namespace fgpart {

/// Worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls fn(i) for every i in [0, n), spread over worker threads. Each index
/// is visited exactly once; callers write results to index-owned slots so
/// output never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fgpart
