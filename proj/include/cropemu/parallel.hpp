#pragma once

#include <cstddef>
#include <functional>

namespace cropemu {

// Process-wide cap on worker threads (the CLI's --jobs flag). 0 selects
// std::thread::hardware_concurrency().
void set_max_jobs(std::size_t jobs);
std::size_t max_jobs();

// Runs body(i) for i in [0, count) over up to max_jobs() threads. Each index
// is visited exactly once; callers write results into pre-sized slots so the
// outcome does not depend on scheduling. The first exception thrown by any
// worker is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace cropemu
