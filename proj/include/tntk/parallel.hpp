#pragma once

#include <cstddef>
#include <functional>

namespace tntk {

// Worker cap for library-internal parallel loops. Zero restores the default
// (hardware concurrency).
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Runs body(i) for every i in [0, count). Iterations must write disjoint
// outputs; results are then independent of the number of workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace tntk
