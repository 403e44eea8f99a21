#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace wigner2e {

// Number of worker threads used by parallel_for. Defaults to 1.
void set_worker_count(int n);
int worker_count();

// Calls body(begin, end) on disjoint contiguous chunks of [0, n).
// Each index is processed by exactly one call, so any per-index result is
// independent of the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        if (n > 0) body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    body(std::size_t{0}, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

// Sum of term(i) for i in [0, n). Partial sums are formed over fixed blocks
// and combined in block order, so the result does not depend on the number
// of workers.
template <class Term>
double ordered_sum(std::size_t n, Term&& term) {
    constexpr std::size_t block = 4096;
    const std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for(nblocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            double s = 0.0;
            const std::size_t e = std::min(n, (b + 1) * block);
            for (std::size_t i = b * block; i < e; ++i) s += term(i);
            partial[b] = s;
        }
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace wigner2e
