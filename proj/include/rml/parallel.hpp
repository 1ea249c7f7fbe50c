#pragma once

#include <cstddef>
#include <functional>

namespace rml {

// Worker count: RML_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Indices are dealt in contiguous blocks so
// callers that write into slot i get results independent of worker count.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rml
