#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "ecinn/common.hpp"

namespace ecinn {

// Worker-thread cap: ECINN_THREADS if set, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("ECINN_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Run fn(chunk_index, begin, count) over [0, n) in fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the thread
// count, so per-chunk results reduced in chunk order are bit-reproducible
// for any ECINN_THREADS setting.
template <typename F>
void parallel_chunks(Eigen::Index n, Eigen::Index chunk_size, F&& fn) {
    if (n <= 0) return;
    const Eigen::Index chunks = (n + chunk_size - 1) / chunk_size;
    auto run = [&](Eigen::Index c) {
        const Eigen::Index begin = c * chunk_size;
        fn(c, begin, std::min(chunk_size, n - begin));
    };

    const int threads = std::min<Eigen::Index>(worker_count(), chunks);
    if (threads <= 1) {
        for (Eigen::Index c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::atomic<Eigen::Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (Eigen::Index c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run(c);
        });
    for (auto& th : pool) th.join();
}

}  // namespace ecinn
