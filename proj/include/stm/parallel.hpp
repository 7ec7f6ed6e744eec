#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace stm {

/// Caps the worker count used by parallel_for. Values < 1 reset to the
/// hardware concurrency.
void set_thread_limit(int threads);
int thread_limit();

/// Runs body(k) for k in [0, n) over contiguous chunks. Each index is visited
/// exactly once, so bodies that write only to slot k give results independent
/// of the thread count. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(Eigen::Index n, Body&& body) {
    const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(thread_limit(), n));
    if (workers <= 1) {
        for (Eigen::Index k = 0; k < n; ++k) body(k);
        return;
    }
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Eigen::Index chunk = (n + workers - 1) / workers;
    for (Eigen::Index w = 0; w < workers; ++w) {
        const Eigen::Index begin = w * chunk;
        const Eigen::Index end = std::min(n, begin + chunk);
        pool.emplace_back([&, begin, end] {
            try {
                for (Eigen::Index k = begin; k < end; ++k) body(k);
            } catch (...) {
                std::lock_guard lock(guard);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace stm
