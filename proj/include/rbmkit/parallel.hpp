#pragma once

#include <thread>
#include <vector>

namespace rbmkit {

/// Static contiguous partition of [0, n) over `workers` threads. Each index is
/// processed exactly once and all outputs must be written to index-addressed
/// slots, so results cannot depend on the worker count.
template <class Body>
void parallel_for(long n, int workers, Body&& body) {
    if (workers <= 1 || n < 2) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    const int w = static_cast<int>(std::min<long>(workers, n));
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (int t = 0; t < w; ++t) {
        const long lo = n * t / w;
        const long hi = n * (t + 1) / w;
        pool.emplace_back([lo, hi, &body] {
            for (long i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace rbmkit
