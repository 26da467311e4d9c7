#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace recdiff {

// Splits [0, count) into contiguous chunks, one per worker. Each worker must
// derive its own RNG streams from item indices so results do not depend on
// the partition.
inline void parallel_chunks(uint64_t count, int threads,
                            const std::function<void(uint64_t begin, uint64_t end)>& fn) {
    if (threads < 1) threads = 1;
    if (threads == 1 || count < 2) {
        fn(0, count);
        return;
    }
    const uint64_t n_workers = std::min<uint64_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (uint64_t w = 0; w < n_workers; ++w) {
        const uint64_t begin = count * w / n_workers;
        const uint64_t end = count * (w + 1) / n_workers;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace recdiff
