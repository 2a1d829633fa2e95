#pragma once

#include <cstddef>
#include <functional>

namespace resynth {

// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
// concurrency). The first exception thrown by any task is rethrown after all
// workers join. Callers write into pre-sized slots so output order never
// depends on scheduling.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

std::size_t resolve_jobs(std::size_t jobs) noexcept;

}  // namespace resynth
