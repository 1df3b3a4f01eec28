#pragma once

#include <cstddef>
#include <functional>

namespace fracctrl {

/// Worker count: hardware concurrency, capped by the FRACCTRL_THREADS environment variable.
unsigned worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads using contiguous chunks.
/// The body must only write to slots owned by its index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace fracctrl
