#pragma once

#include <Eigen/Core>

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prmix {

/// Runs fn(i) for i in [0, count) across up to `threads` workers pulling from
/// an atomic counter. Callers key all results by i, so the schedule never
/// affects output. The first exception thrown by any worker is rethrown on
/// the calling thread after all workers have joined.
template <typename Fn>
void parallel_for(Eigen::Index count, Fn&& fn, unsigned threads) {
    if (count <= 0) return;
    if (threads <= 1 || count == 1) {
        for (Eigen::Index i = 0; i < count; ++i) fn(i);
        return;
    }
    const unsigned workers =
        std::min<unsigned>(threads, static_cast<unsigned>(count));
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const Eigen::Index i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace prmix
