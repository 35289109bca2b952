#ifndef RBDSDE_DETAIL_PARALLEL_HPP
#define RBDSDE_DETAIL_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rbdsde::detail {

/// Run fn(0..count-1) on up to `jobs` threads. Work items must write disjoint
/// state; the first exception wins and is rethrown on the calling thread.
/// Results are independent of the thread count by construction.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i)
            fn(i);
        return;
    }
    const int workers = jobs < count ? jobs : count;
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= count)
                    return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace rbdsde::detail

#endif
