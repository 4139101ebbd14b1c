#pragma once

#include <cstddef>
#include <functional>

namespace g2i {

/// Runs body(k) for k in [0, count) on up to `threads` workers.
/// Work items must write to disjoint outputs; the first exception thrown by
/// any item is rethrown after all workers have joined.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// 0 selects std::thread::hardware_concurrency().
unsigned resolve_threads(unsigned requested) noexcept;

} // namespace g2i
