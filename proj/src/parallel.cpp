#include "hsplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hsplat {

int worker_count() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("VISIONARY_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) {
                return static_cast<int>(std::min<long>(v, 256));
            }
        } catch (const std::exception&) {
        }
    }
    return static_cast<int>(hw);
}

void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn, int workers) {
    const std::size_t chunks = chunk_count(n, grain);
    if (chunks == 0) {
        return;
    }
    if (workers <= 0) {
        workers = worker_count();
    }
    const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), chunks));
    auto run_chunk = [&](std::size_t c) { fn(c, c * grain, std::min(n, (c + 1) * grain)); };
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            run_chunk(c);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
            try {
                run_chunk(c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = chunks;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace hsplat
