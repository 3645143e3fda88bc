#ifndef RANDCLT_PARALLEL_HPP
#define RANDCLT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace randclt {

/// Thread count from RANDCLT_THREADS, or 1.
inline unsigned default_threads()
{
    if (const char* env = std::getenv("RANDCLT_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return 1;
}

/// Calls task(i) for every i in [0, count). Tasks are handed out
/// dynamically; each task must write only to its own slot so the outcome
/// is independent of scheduling. The first exception thrown by a task is
/// rethrown on the calling thread.
template <class Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i)
            task(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

/// Fixed chunking used by every Monte Carlo estimator. Chunk c always covers
/// samples [c*chunk_size, min((c+1)*chunk_size, total)).
inline constexpr std::size_t mc_chunk_size = 4096;

inline std::size_t chunk_count(std::size_t total, std::size_t chunk = mc_chunk_size)
{
    return (total + chunk - 1) / chunk;
}

} // namespace randclt

#endif
