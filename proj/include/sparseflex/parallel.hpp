#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace sparseflex
{
    /// Process-wide worker count used by the library's parallel loops. Defaults to 1.
    int num_threads();
    void set_num_threads(int n);

    /// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are fixed by
    /// (n, num_threads()), and callers only write to slots owned by their chunk, so
    /// results never depend on scheduling.
    template <typename Body>
    void parallel_for(std::size_t n, Body && body, std::size_t min_chunk = 1024)
    {
        const std::size_t workers = std::min<std::size_t>(
            static_cast<std::size_t>(std::max(1, num_threads())), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
        if (workers <= 1)
        {
            if (n > 0) body(std::size_t{0}, n);
            return;
        }
        const std::size_t chunk = (n + workers - 1) / workers;
        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
        {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back([&body, b, e] { body(b, e); });
        }
        body(std::size_t{0}, std::min(n, chunk));
        for (auto & t : pool) t.join();
    }
}  // namespace sparseflex
