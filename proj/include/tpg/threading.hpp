#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace tpg {

// Chunked parallel for. Chunk boundaries depend only on n, never on the
// thread count, and each chunk writes disjoint outputs, so results are
// bitwise identical for any number of workers.
class ThreadPool {
public:
    static ThreadPool& instance();

    // n > 0 sets the worker count; returns the active count.
    static int set_threads(int n);
    static int threads();

    // fn(begin, end) over [0, n) in fixed chunks.
    void run_chunked(int64_t n, int64_t chunk, const std::function<void(int64_t, int64_t)>& fn);

    ~ThreadPool();

private:
    struct Job {
        const std::function<void(int64_t, int64_t)>* fn;
        int64_t n, chunk;
        std::atomic<int64_t> next{0};
        std::atomic<int64_t> left;
    };

    ThreadPool() = default;
    void resize(int n);
    void worker_loop();
    static void drain(Job& job, std::condition_variable* done);

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_task_, cv_done_;
    std::shared_ptr<Job> job_;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

// Default chunk picks a size that amortizes dispatch; it is a function of n
// only (not of the worker count).
inline int64_t default_chunk(int64_t n) {
    int64_t c = n / 64;
    if (c < 256) c = 256;
    return c;
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);
void parallel_for_chunk(int64_t n, int64_t chunk, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace tpg
