#pragma once

#include <cstddef>
#include <functional>

namespace graybox {

/// Worker cap: GRAYBOX_THREADS when set to a positive integer, otherwise the
/// hardware concurrency. Read from the environment on every call so tests can
/// change it mid-process.
std::size_t max_workers();

/// Runs fn(i) for every i in [0, n). Work items must be independent and write
/// only to their own slots; callers needing a deterministic reduction combine
/// per-index results in index order afterwards. If several items throw, the
/// lowest-index exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace graybox
