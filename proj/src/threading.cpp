#include "tpg/threading.hpp"

namespace tpg {

namespace {
std::atomic<int> g_threads{1};
}

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

ThreadPool::~ThreadPool() {
    {
        std::unique_lock<std::mutex> lk(mu_);
        stop_ = true;
    }
    cv_task_.notify_all();
    for (auto& t : workers_) t.join();
}

int ThreadPool::set_threads(int n) {
    if (n > 0) {
        g_threads.store(n);
        instance().resize(n);
    }
    return g_threads.load();
}

int ThreadPool::threads() { return g_threads.load(); }

void ThreadPool::resize(int n) {
    std::unique_lock<std::mutex> lk(mu_);
    int want = n - 1;  // caller participates
    while (static_cast<int>(workers_.size()) < want)
        workers_.emplace_back([this] { worker_loop(); });
}

void ThreadPool::drain(Job& job, std::condition_variable* done) {
    for (;;) {
        int64_t c = job.next.fetch_add(1);
        int64_t begin = c * job.chunk;
        if (begin >= job.n) break;
        int64_t end = begin + job.chunk < job.n ? begin + job.chunk : job.n;
        (*job.fn)(begin, end);
        if (job.left.fetch_sub(1) == 1 && done) done->notify_all();
    }
}

void ThreadPool::worker_loop() {
    uint64_t seen = 0;
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock<std::mutex> lk(mu_);
            cv_task_.wait(lk, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
        }
        if (job) drain(*job, &cv_done_);
    }
}

void ThreadPool::run_chunked(int64_t n, int64_t chunk,
                             const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (chunk < 1) chunk = 1;
    int64_t nchunks = (n + chunk - 1) / chunk;
    if (g_threads.load() <= 1 || nchunks == 1 || workers_.empty()) {
        for (int64_t c = 0; c < nchunks; ++c) {
            int64_t b = c * chunk, e = b + chunk < n ? b + chunk : n;
            fn(b, e);
        }
        return;
    }
    auto job = std::make_shared<Job>();
    job->fn = &fn;
    job->n = n;
    job->chunk = chunk;
    job->left.store(nchunks);
    {
        std::unique_lock<std::mutex> lk(mu_);
        job_ = job;
        ++generation_;
    }
    cv_task_.notify_all();
    drain(*job, &cv_done_);
    std::unique_lock<std::mutex> lk(mu_);
    cv_done_.wait(lk, [&] { return job->left.load() <= 0; });
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    ThreadPool::instance().run_chunked(n, default_chunk(n), fn);
}

void parallel_for_chunk(int64_t n, int64_t chunk, const std::function<void(int64_t, int64_t)>& fn) {
    ThreadPool::instance().run_chunked(n, chunk, fn);
}

}  // namespace tpg
