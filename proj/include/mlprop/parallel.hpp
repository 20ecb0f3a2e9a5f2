#ifndef MLPROP_PARALLEL_HPP
#define MLPROP_PARALLEL_HPP

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mlprop/grid.hpp"

namespace mlprop {

// Worker cap: MLPROP_THREADS, default all cores.
inline unsigned worker_count() {
    if (const char* env = std::getenv("MLPROP_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Deterministic parallel map: each index writes only its own results.
template <class Fn>
void parallel_for(index_t count, Fn&& fn) {
    const unsigned workers = std::min<index_t>(worker_count(), count ? count : 1);
    if (workers <= 1) {
        for (index_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (index_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mlprop

#endif
