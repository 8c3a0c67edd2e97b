// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace littlebit {

/// Worker cap: LITTLEBIT_THREADS when set to a positive integer, else hardware concurrency.
unsigned thread_count();

/// Overrides the cap for the remainder of the process (0 restores the default).
void set_thread_count(unsigned n);

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Chunks never share an index, so per-index work stays deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 1);

}  // namespace littlebit
