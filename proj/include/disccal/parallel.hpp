#pragma once

#include <cstddef>
#include <functional>

namespace disccal {

/// Caps worker threads for every batch operation. 0 restores the default
/// (hardware concurrency).
void set_thread_limit(std::size_t threads);
std::size_t thread_limit();

/// Runs body(i) for i in [0, count) on up to thread_limit() threads. Work is
/// handed out by index, so results written per index do not depend on the
/// thread count. Exceptions from body are rethrown on the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace disccal
