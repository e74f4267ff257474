#pragma once

#include <cstddef>
#include <functional>

namespace sdfgen {

/// Worker count: the SDFGEN_THREADS environment variable when set to a
/// positive integer, otherwise the hardware concurrency.
unsigned default_thread_count();

/// Runs body(i) for i in [0, n) over `threads` workers with a static block
/// partition. Bodies must be independent; results never depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace sdfgen
