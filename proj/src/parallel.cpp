#include "riskpipe/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

#include "riskpipe/errors.hpp"

namespace riskpipe {

void bounded_parallel_for(std::size_t n, int limit, const std::function<void(std::size_t)>& fn) {
    if (limit < 1) throw ValidationError("concurrency limit must be >= 1");
    if (n == 0) return;
    if (limit == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(limit), n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace riskpipe
