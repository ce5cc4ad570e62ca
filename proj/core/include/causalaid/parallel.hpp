#pragma once

#include <cstddef>
#include <functional>

namespace causalaid {

// Runs body(i) for i in [0, n) on a pool of worker threads. Calls made from
// inside a running body execute serially on the calling thread, so nested
// loops (bootstrap replicates -> forest trees) never oversubscribe.
// Callers must write results by index; no ordering is implied.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Worker count used by parallel_for. Defaults to hardware concurrency;
// set_thread_count(1) forces serial execution.
std::size_t thread_count();
void set_thread_count(std::size_t n);

}  // namespace causalaid
