#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace confdrift {

/// Number of workers to use when the caller passes 0.
inline unsigned resolve_workers(unsigned requested) {
    if (requested != 0) {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Number of threads parallel_for_workers will actually start.
inline unsigned worker_slots(std::size_t count, unsigned workers) {
    return static_cast<unsigned>(
        std::max<std::size_t>(1, std::min<std::size_t>(resolve_workers(workers), count)));
}

/// Runs fn(worker, i) for i in [0, count) on worker_slots(count, workers)
/// threads. Indices are handed out dynamically, so anything accumulated per
/// worker must be merged with an order-independent reduction. The first
/// exception thrown is rethrown.
template <typename Fn>
void parallel_for_workers(std::size_t count, unsigned workers, Fn&& fn) {
    const unsigned n_threads = worker_slots(count, workers);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(0u, i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&](unsigned w) {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count || failed.load(std::memory_order_relaxed)) {
                return;
            }
            try {
                fn(w, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };

    std::vector<std::jthread> threads;
    threads.reserve(n_threads - 1);
    for (unsigned t = 1; t < n_threads; ++t) {
        threads.emplace_back(worker, t);
    }
    worker(0u);
    threads.clear();

    if (error) {
        std::rethrow_exception(error);
    }
}

/// Runs fn(i) for i in [0, count). Callers write results into slot i so the
/// outcome never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    parallel_for_workers(count, workers, [&](unsigned, std::size_t i) { fn(i); });
}

}  // namespace confdrift
